#include "seqlearn/checkpoint.hpp"

#include <bit>
#include <cstring>

namespace seqlearn {

namespace {

enum class LayerKind : std::uint8_t { conv2d = 0, dense = 1, relu = 2, maxpool2d = 3, flatten = 4 };

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void raw(const char* magic, std::size_t n) { bytes_.insert(bytes_.end(), magic, magic + n); }

    template <class T>
    void tensor(const Tensor<T>& t) {
        u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) u64(d);
        for (T v : t.values()) {
            if constexpr (sizeof(T) == 4)
                u32(std::bit_cast<std::uint32_t>(v));
            else
                u64(std::bit_cast<std::uint64_t>(v));
        }
    }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get(1, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
    std::uint64_t u64(const char* what) { return get(8, what); }

    void expect_magic() {
        need(4, "magic");
        if (std::memcmp(bytes_.data(), "SQLN", 4) != 0) throw ParseError("checkpoint: bad magic", 0);
        pos_ = 4;
    }

    template <class T>
    Tensor<T> tensor(const Shape& expected, const std::string& what) {
        const std::size_t start = pos_;
        const std::uint32_t rank = u32("tensor rank");
        if (rank > 8) throw ParseError("checkpoint: implausible rank for " + what, start);
        Shape shape(rank);
        for (auto& d : shape) d = u64("tensor dim");
        if (shape != expected)
            throw ParseError("checkpoint: " + what + " shape " + shape_string(shape) + " does not match header " +
                             shape_string(expected), start);
        const std::size_t n = shape_size(shape);
        need(n * sizeof(T), what.c_str());
        std::vector<T> data(n);
        for (auto& v : data) {
            if constexpr (sizeof(T) == 4)
                v = std::bit_cast<T>(static_cast<std::uint32_t>(get(4, "payload")));
            else
                v = std::bit_cast<T>(get(8, "payload"));
        }
        return Tensor<T>(std::move(shape), std::move(data));
    }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n)
            throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
    std::uint64_t get(int n, const char* what) {
        need(static_cast<std::size_t>(n), what);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

void write_layer(Writer& w, const LayerSpec& spec) {
    std::vector<std::uint64_t> fields;
    LayerKind kind{};
    if (const auto* c = std::get_if<Conv2dSpec>(&spec)) {
        kind = LayerKind::conv2d;
        fields = {c->in_channels, c->out_channels, c->kernel, c->stride, c->padding};
    } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
        kind = LayerKind::dense;
        fields = {d->in_features, d->out_features};
    } else if (std::holds_alternative<ReluSpec>(spec)) {
        kind = LayerKind::relu;
    } else if (const auto* m = std::get_if<MaxPool2dSpec>(&spec)) {
        kind = LayerKind::maxpool2d;
        fields = {m->kernel};
    } else {
        kind = LayerKind::flatten;
    }
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(static_cast<std::uint32_t>(fields.size()));
    for (auto f : fields) w.u64(f);
}

LayerSpec read_layer(Reader& r) {
    const std::size_t start = r.offset();
    const auto kind = static_cast<LayerKind>(r.u8("layer kind"));
    const std::uint32_t count = r.u32("layer field count");
    if (count > 8) throw ParseError("checkpoint: implausible layer field count", start);
    std::vector<std::size_t> f(count);
    for (auto& v : f) v = r.u64("layer field");
    auto require = [&](std::uint32_t n) {
        if (count != n) throw ParseError("checkpoint: wrong field count for layer kind", start);
    };
    switch (kind) {
    case LayerKind::conv2d: require(5); return Conv2dSpec{f[0], f[1], f[2], f[3], f[4]};
    case LayerKind::dense: require(2); return DenseSpec{f[0], f[1]};
    case LayerKind::relu: require(0); return ReluSpec{};
    case LayerKind::maxpool2d: require(1); return MaxPool2dSpec{f[0]};
    case LayerKind::flatten: require(0); return FlattenSpec{};
    }
    throw ParseError("checkpoint: unknown layer kind", start);
}

} // namespace

template <class T>
std::vector<std::uint8_t> checkpoint_encode(const ModelState<T>& model) {
    Writer w;
    w.raw("SQLN", 4);
    w.u32(kCheckpointVersion);
    w.u8(sizeof(T));
    w.u32(static_cast<std::uint32_t>(model.input_shape.size()));
    for (auto d : model.input_shape) w.u64(d);
    w.u32(static_cast<std::uint32_t>(model.layers.size()));
    for (const auto& l : model.layers) write_layer(w, l);

    std::vector<const Tensor<T>*> tensors;
    for (const auto& p : model.params)
        if (p.has_params()) {
            tensors.push_back(&p.weight);
            tensors.push_back(&p.bias);
        }
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto* t : tensors) w.tensor(*t);

    const auto& opt = model.optimizer;
    w.u8(opt.present ? 1 : 0);
    if (opt.present) {
        w.u8(static_cast<std::uint8_t>(opt.kind));
        w.u32(static_cast<std::uint32_t>(opt.first.size() + opt.second.size()));
        for (const auto& t : opt.first) w.tensor(t);
        for (const auto& t : opt.second) w.tensor(t);
    }
    w.u64(model.step);
    return w.take();
}

template <class T>
ModelState<T> checkpoint_decode(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    r.expect_magic();
    const std::size_t version_at = r.offset();
    if (const auto v = r.u32("version"); v != kCheckpointVersion)
        throw ParseError("checkpoint: unsupported format version " + std::to_string(v), version_at);
    const std::size_t scalar_at = r.offset();
    if (const auto s = r.u8("scalar size"); s != sizeof(T))
        throw ParseError("checkpoint: stored scalar size " + std::to_string(s) + " does not match requested " +
                         std::to_string(sizeof(T)), scalar_at);

    ModelState<T> model;
    const std::uint32_t in_rank = r.u32("input rank");
    if (in_rank != 3) throw ParseError("checkpoint: input rank must be 3", r.offset() - 4);
    model.input_shape.resize(in_rank);
    for (auto& d : model.input_shape) d = r.u64("input dim");

    const std::size_t layers_at = r.offset();
    const std::uint32_t n_layers = r.u32("layer count");
    if (n_layers > 4096) throw ParseError("checkpoint: implausible layer count", layers_at);
    for (std::uint32_t i = 0; i < n_layers; ++i) model.layers.push_back(read_layer(r));
    try {
        if (resolve_layers(model.layers, model.input_shape) != model.layers)
            throw ConfigError("stored layer sizes are inconsistent");
    } catch (const ConfigError& e) {
        throw ParseError(std::string("checkpoint: corrupt layer table: ") + e.what(), layers_at);
    }

    std::vector<Shape> shapes;
    for (const auto& l : model.layers) {
        model.params.push_back(make_layer_params<T>(l));
        if (model.params.back().has_params()) {
            shapes.push_back(model.params.back().weight.shape());
            shapes.push_back(model.params.back().bias.shape());
        }
    }
    const std::size_t tensors_at = r.offset();
    if (r.u32("tensor count") != shapes.size())
        throw ParseError("checkpoint: tensor count does not match layer table", tensors_at);
    std::size_t k = 0;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        auto& p = model.params[i];
        if (!p.has_params()) continue;
        p.weight = r.template tensor<T>(shapes[k++], "layer" + std::to_string(i) + ".weight");
        p.bias = r.template tensor<T>(shapes[k++], "layer" + std::to_string(i) + ".bias");
    }

    const std::size_t opt_at = r.offset();
    const std::uint8_t present = r.u8("optimizer flag");
    if (present > 1) throw ParseError("checkpoint: bad optimizer presence flag", opt_at);
    if (present) {
        auto& opt = model.optimizer;
        opt.present = true;
        const std::uint8_t kind = r.u8("optimizer kind");
        if (kind > 1) throw ParseError("checkpoint: unknown optimizer kind", opt_at + 1);
        opt.kind = static_cast<OptimizerKind>(kind);
        const std::size_t per = opt.kind == OptimizerKind::adam ? 2 : 1;
        const std::size_t count_at = r.offset();
        if (r.u32("optimizer tensor count") != per * shapes.size())
            throw ParseError("checkpoint: optimizer tensor count does not match parameters", count_at);
        for (const auto& s : shapes) opt.first.push_back(r.template tensor<T>(s, "optimizer.first"));
        if (per == 2)
            for (const auto& s : shapes) opt.second.push_back(r.template tensor<T>(s, "optimizer.second"));
    }
    model.step = r.u64("step counter");
    if (!r.at_end()) throw ParseError("checkpoint: trailing bytes", r.offset());
    return model;
}

template <class T>
void checkpoint_save(const ModelState<T>& model, const std::filesystem::path& path) {
    write_file_bytes(path, checkpoint_encode(model));
}

template <class T>
ModelState<T> checkpoint_load(const std::filesystem::path& path) {
    return checkpoint_decode<T>(read_file_bytes(path));
}

template std::vector<std::uint8_t> checkpoint_encode<float>(const ModelState<float>&);
template std::vector<std::uint8_t> checkpoint_encode<double>(const ModelState<double>&);
template ModelState<float> checkpoint_decode<float>(const std::vector<std::uint8_t>&);
template ModelState<double> checkpoint_decode<double>(const std::vector<std::uint8_t>&);
template void checkpoint_save<float>(const ModelState<float>&, const std::filesystem::path&);
template void checkpoint_save<double>(const ModelState<double>&, const std::filesystem::path&);
template ModelState<float> checkpoint_load<float>(const std::filesystem::path&);
template ModelState<double> checkpoint_load<double>(const std::filesystem::path&);

} // namespace seqlearn
