#include "seqlearn/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/rng.hpp"

namespace seqlearn {

Manifest::Manifest(std::vector<ManifestEntry> entries, std::vector<std::string> class_names)
    : entries_(std::move(entries)), class_names_(std::move(class_names)) {
    validate();
}

Manifest Manifest::from_entries(std::vector<ManifestEntry> entries) {
    std::set<std::string> names;
    for (const auto& e : entries) names.insert(e.label);
    return Manifest(std::move(entries), std::vector<std::string>(names.begin(), names.end()));
}

void Manifest::validate() const {
    if (!std::is_sorted(class_names_.begin(), class_names_.end()) ||
        std::adjacent_find(class_names_.begin(), class_names_.end()) != class_names_.end())
        throw DataError("manifest class names must be sorted and unique");
    std::set<std::string> paths;
    for (const auto& e : entries_) {
        if (!std::binary_search(class_names_.begin(), class_names_.end(), e.label))
            throw DataError("manifest label '" + e.label + "' is not in the class list");
        if (!paths.insert(e.path).second) throw DataError("duplicate manifest path '" + e.path + "'");
    }
}

std::size_t Manifest::class_index(const std::string& label) const {
    const auto it = std::lower_bound(class_names_.begin(), class_names_.end(), label);
    if (it == class_names_.end() || *it != label) throw DataError("unknown class '" + label + "'");
    return static_cast<std::size_t>(it - class_names_.begin());
}

std::vector<std::size_t> Manifest::labels() const {
    std::vector<std::size_t> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(class_index(e.label));
    return out;
}

Manifest Manifest::select(const std::vector<std::size_t>& indices) const {
    std::vector<ManifestEntry> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= entries_.size()) throw UsageError("manifest index " + std::to_string(i) + " out of range");
        picked.push_back(entries_[i]);
    }
    return Manifest(std::move(picked), class_names_);
}

std::string manifest_to_text(const Manifest& manifest) {
    std::string out = "#classes:\t";
    for (std::size_t i = 0; i < manifest.class_names().size(); ++i)
        out += (i ? "," : "") + manifest.class_names()[i];
    out += '\n';
    for (const auto& e : manifest.entries()) out += e.path + '\t' + e.label + '\n';
    return out;
}

Manifest manifest_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || line.rfind("#classes:\t", 0) != 0)
        throw ParseError("manifest: missing '#classes:' header", 1);
    ++line_no;
    std::vector<std::string> classes;
    {
        std::istringstream names(line.substr(10));
        std::string n;
        while (std::getline(names, n, ','))
            if (!n.empty()) classes.push_back(n);
    }
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
            line.find('\t', tab + 1) != std::string::npos)
            throw ParseError("manifest: expected 'path<TAB>label'", line_no);
        entries.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    try {
        return Manifest(std::move(entries), std::move(classes));
    } catch (const ParseError&) {
        throw;
    } catch (const DataError& e) {
        throw ParseError(std::string("manifest: ") + e.what(), line_no);
    }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    write_file_text(path, manifest_to_text(manifest));
}

Manifest read_manifest(const std::filesystem::path& path) {
    try {
        return manifest_from_text(read_file_text(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.position());
    }
}

Manifest ingest_directory(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw DataError("dataset root '" + root.string() + "' is not a directory");
    std::vector<std::string> classes;
    for (const auto& d : fs::directory_iterator(root)) {
        const std::string name = d.path().filename().string();
        if (d.is_directory() && !name.empty() && name[0] != '.') classes.push_back(name);
    }
    std::sort(classes.begin(), classes.end());
    if (classes.empty()) throw DataError("dataset root '" + root.string() + "' has no class directories");
    std::vector<ManifestEntry> entries;
    for (const auto& cls : classes) {
        std::vector<std::string> files;
        for (const auto& f : fs::directory_iterator(root / cls))
            if (f.is_regular_file() && f.path().extension() == ".pgm") files.push_back(f.path().filename().string());
        if (files.empty()) throw DataError("class directory '" + cls + "' contains no .pgm images");
        std::sort(files.begin(), files.end());
        for (const auto& f : files) entries.push_back({cls + "/" + f, cls});
    }
    return Manifest(std::move(entries), classes);
}

ManifestSplit split_manifest(const Manifest& manifest, const SplitFractions& fractions, std::uint64_t seed) {
    const double sum = fractions.train + fractions.validation + fractions.test;
    if (std::abs(sum - 1.0) > 1e-9 || fractions.train < 0 || fractions.validation < 0 || fractions.test < 0)
        throw ConfigError("split fractions must be non-negative and sum to 1 (got " + std::to_string(sum) + ")");
    if (manifest.empty()) throw DataError("cannot split an empty manifest");

    std::vector<std::vector<std::size_t>> by_class(manifest.class_names().size());
    for (std::size_t i = 0; i < manifest.size(); ++i) by_class[manifest.label_index(i)].push_back(i);

    std::vector<std::size_t> train, val, test;
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& idx = by_class[k];
        Rng rng(seed, Stream::split, {k});
        rng.shuffle(std::span<std::size_t>(idx));
        const double n = static_cast<double>(idx.size());
        // The small epsilon keeps exact products such as 10000 * 0.1 from flooring down.
        const auto n_val = static_cast<std::size_t>(std::floor(n * fractions.validation + 1e-9));
        const auto n_test = static_cast<std::size_t>(std::floor(n * fractions.test + 1e-9));
        const std::size_t n_train = idx.size() - n_val - n_test;
        train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        val.insert(val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                   idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
        test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    }
    return {manifest.select(train), manifest.select(val), manifest.select(test)};
}

void write_split(const ManifestSplit& split, const std::filesystem::path& dir) {
    write_manifest(split.train, dir / kSplitFileNames[0]);
    write_manifest(split.validation, dir / kSplitFileNames[1]);
    write_manifest(split.test, dir / kSplitFileNames[2]);
}

ManifestSplit read_split(const std::filesystem::path& dir) {
    return {read_manifest(dir / kSplitFileNames[0]), read_manifest(dir / kSplitFileNames[1]),
            read_manifest(dir / kSplitFileNames[2])};
}

} // namespace seqlearn
