#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seqlearn {

struct ManifestEntry {
    std::string path;   // relative to the dataset root, "class_dir/file.pgm"
    std::string label;
    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Ordered (path, label) list. Class index = position of the label in the sorted class list.
class Manifest {
public:
    Manifest() = default;
    Manifest(std::vector<ManifestEntry> entries, std::vector<std::string> class_names);

    // Class list is taken from the labels present.
    static Manifest from_entries(std::vector<ManifestEntry> entries);

    const std::vector<ManifestEntry>& entries() const { return entries_; }
    const std::vector<std::string>& class_names() const { return class_names_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const ManifestEntry& operator[](std::size_t i) const { return entries_[i]; }

    std::size_t class_index(const std::string& label) const;
    std::size_t label_index(std::size_t entry) const { return class_index(entries_[entry].label); }
    std::vector<std::size_t> labels() const;

    // Subset in the given order, keeping the full class list.
    Manifest select(const std::vector<std::size_t>& indices) const;

    friend bool operator==(const Manifest&, const Manifest&) = default;

private:
    void validate() const;

    std::vector<ManifestEntry> entries_;
    std::vector<std::string> class_names_;
};

// Text form: "#classes:\tname1,name2,..." then one "path\tlabel" line per entry (LF).
std::string manifest_to_text(const Manifest& manifest);
Manifest manifest_from_text(const std::string& text);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

// One subdirectory per class holding .pgm files; entries sorted by (class, filename).
Manifest ingest_directory(const std::filesystem::path& root);

struct SplitFractions {
    double train = 0.70;
    double validation = 0.10;
    double test = 0.20;
};

struct ManifestSplit {
    Manifest train;
    Manifest validation;
    Manifest test;
};

// Per-class seeded shuffle; validation and test get floor(n * fraction), train takes the remainder.
ManifestSplit split_manifest(const Manifest& manifest, const SplitFractions& fractions, std::uint64_t seed);

inline constexpr std::array<const char*, 3> kSplitFileNames{"train.txt", "val.txt", "test.txt"};

void write_split(const ManifestSplit& split, const std::filesystem::path& dir);
ManifestSplit read_split(const std::filesystem::path& dir);

} // namespace seqlearn
