#include "seqlearn/model.hpp"

#include <cmath>
#include <sstream>

#include "seqlearn/rng.hpp"

namespace seqlearn {

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("optimizer.lr must be > 0");
    if (kind == OptimizerKind::adam) {
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must be in [0, 1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must be in [0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be > 0");
    } else if (!(momentum >= 0.0)) {
        throw ConfigError("optimizer.momentum must be >= 0");
    }
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer_kind(const std::string& text) {
    if (text == "adam") return OptimizerKind::adam;
    if (text == "sgd") return OptimizerKind::sgd;
    throw ConfigError("unknown optimizer kind '" + text + "' (expected adam or sgd)");
}

template <class T>
std::size_t ModelState<T>::num_classes() const {
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) s = layer_output_shape(layers[i], s, i);
    return s.empty() ? 0 : s[0];
}

template <class T>
std::size_t ModelState<T>::num_parameters() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.weight.size() + p.bias.size();
    return n;
}

std::vector<LayerSpec> resolve_layers(std::vector<LayerSpec> layers, const Shape& input_shape) {
    if (input_shape.size() != 3 || shape_size(input_shape) == 0)
        throw ConfigError("model input shape must be [channels, height, width], got " + shape_string(input_shape));
    if (layers.empty()) throw ConfigError("model has no layers");
    Shape s = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (auto* c = std::get_if<Conv2dSpec>(&layers[i]); c && !s.empty() && s.size() == 3) c->in_channels = s[0];
        if (auto* d = std::get_if<DenseSpec>(&layers[i]); d && s.size() == 1) d->in_features = s[0];
        s = layer_output_shape(layers[i], s, i);
    }
    if (s.size() != 1)
        throw ConfigError("layer " + std::to_string(layers.size() - 1) + " (" + layer_name(layers.back()) +
                          "): model must end in a flat [classes] output, got " + shape_string(s));
    return layers;
}

std::vector<LayerSpec> parse_layers(const std::string& text) {
    std::vector<LayerSpec> layers;
    std::istringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
        std::vector<std::string> parts;
        std::istringstream fields(item);
        std::string f;
        while (std::getline(fields, f, ':')) parts.push_back(f);
        auto num = [&](std::size_t i, std::size_t fallback) -> std::size_t {
            if (i >= parts.size()) return fallback;
            try {
                std::size_t used = 0;
                const long long v = std::stoll(parts[i], &used);
                if (used != parts[i].size() || v < 0) throw std::invalid_argument(parts[i]);
                return static_cast<std::size_t>(v);
            } catch (const std::exception&) {
                throw ConfigError("layer '" + item + "': bad integer '" + parts[i] + "'");
            }
        };
        const std::string kind = parts.empty() ? "" : parts[0];
        if (kind == "conv" && parts.size() >= 3 && parts.size() <= 5) {
            layers.emplace_back(Conv2dSpec{1, num(1, 1), num(2, 3), num(3, 1), num(4, 0)});
        } else if (kind == "dense" && parts.size() == 2) {
            layers.emplace_back(DenseSpec{1, num(1, 1)});
        } else if (kind == "relu" && parts.size() == 1) {
            layers.emplace_back(ReluSpec{});
        } else if (kind == "maxpool" && parts.size() == 2) {
            layers.emplace_back(MaxPool2dSpec{num(1, 2)});
        } else if (kind == "flatten" && parts.size() == 1) {
            layers.emplace_back(FlattenSpec{});
        } else {
            throw ConfigError("unrecognised layer '" + item + "'");
        }
        validate_layer(layers.back(), layers.size() - 1);
    }
    return layers;
}

std::string layers_to_string(const std::vector<LayerSpec>& layers) {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) out += (i ? "," : "") + layer_to_string(layers[i]);
    return out;
}

std::vector<LayerSpec> default_layers(const Shape& input_shape, std::size_t classes, std::size_t conv_channels,
                                      std::size_t blocks, std::size_t kernel) {
    std::vector<LayerSpec> layers;
    for (std::size_t b = 0; b < blocks; ++b) {
        layers.emplace_back(Conv2dSpec{1, conv_channels, kernel, 1, kernel / 2});
        layers.emplace_back(ReluSpec{});
        layers.emplace_back(MaxPool2dSpec{2});
    }
    layers.emplace_back(FlattenSpec{});
    layers.emplace_back(DenseSpec{1, classes});
    return resolve_layers(std::move(layers), input_shape);
}

namespace {

template <class T>
std::vector<Tensor<T>*> parameter_tensors(ModelState<T>& model) {
    std::vector<Tensor<T>*> out;
    for (auto& p : model.params)
        if (p.has_params()) {
            out.push_back(&p.weight);
            out.push_back(&p.bias);
        }
    return out;
}

template <class T>
std::vector<const Tensor<T>*> gradient_tensors(const ModelState<T>& model, const std::vector<LayerParams<T>>& grads) {
    if (grads.size() != model.params.size())
        throw UsageError("gradient list has " + std::to_string(grads.size()) + " layers, model has " +
                         std::to_string(model.params.size()));
    std::vector<const Tensor<T>*> out;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!model.params[i].has_params()) continue;
        if (grads[i].weight.shape() != model.params[i].weight.shape() ||
            grads[i].bias.shape() != model.params[i].bias.shape())
            throw UsageError("gradient shapes for layer " + std::to_string(i) + " do not match its parameters");
        out.push_back(&grads[i].weight);
        out.push_back(&grads[i].bias);
    }
    for (const auto* g : out)
        if (!g->all_finite()) throw NumericError("non-finite gradient; optimizer step aborted at step " +
                                                 std::to_string(model.step + 1));
    return out;
}

template <class T>
void prepare_state(ModelState<T>& model, OptimizerKind kind) {
    auto& st = model.optimizer;
    if (st.present && st.kind != kind)
        throw ConfigError("model carries " + to_string(st.kind) + " optimizer state but " + to_string(kind) +
                          " was requested");
    if (st.present) return;
    st = OptimizerState<T>{};
    st.present = true;
    st.kind = kind;
    for (const auto* p : parameter_tensors(model)) {
        st.first.emplace_back(p->shape());
        if (kind == OptimizerKind::adam) st.second.emplace_back(p->shape());
    }
}

} // namespace

template <class T>
ModelState<T> build_model(std::vector<LayerSpec> layers, const Shape& input_shape, std::uint64_t seed) {
    ModelState<T> model;
    model.layers = resolve_layers(std::move(layers), input_shape);
    model.input_shape = input_shape;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        LayerParams<T> p = make_layer_params<T>(model.layers[i]);
        if (p.has_params()) {
            const std::size_t fan_in = p.weight.size() / p.weight.dim(0);
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            Rng rng(seed, Stream::init, {i});
            for (T& w : p.weight.values()) w = static_cast<T>(stddev * rng.normal());
        }
        model.params.push_back(std::move(p));
    }
    return model;
}

template <class T, class U>
ModelState<U> cast_model(const ModelState<T>& model) {
    ModelState<U> out;
    out.layers = model.layers;
    out.input_shape = model.input_shape;
    out.step = model.step;
    for (const auto& p : model.params) out.params.push_back({p.weight.template cast<U>(), p.bias.template cast<U>()});
    out.optimizer.present = model.optimizer.present;
    out.optimizer.kind = model.optimizer.kind;
    for (const auto& t : model.optimizer.first) out.optimizer.first.push_back(t.template cast<U>());
    for (const auto& t : model.optimizer.second) out.optimizer.second.push_back(t.template cast<U>());
    return out;
}

template <class T>
ForwardPass<T> model_forward(const ModelState<T>& model, const Tensor<T>& inputs) {
    Shape expected{0};
    expected.insert(expected.end(), model.input_shape.begin(), model.input_shape.end());
    if (inputs.rank() != expected.size() || inputs.dim(0) == 0 ||
        !std::equal(model.input_shape.begin(), model.input_shape.end(), inputs.shape().begin() + 1)) {
        expected[0] = inputs.rank() ? inputs.dim(0) : 0;
        throw ConfigError("model input: expected " + shape_string(expected) + ", got " + shape_string(inputs.shape()));
    }
    ForwardPass<T> pass;
    pass.caches.resize(model.layers.size());
    Tensor<T> x = inputs;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        x = layer_forward(model.layers[i], model.params[i], x, pass.caches[i], i);
    pass.logits = std::move(x);
    return pass;
}

template <class T>
std::vector<LayerParams<T>> model_backward(const ModelState<T>& model, const ForwardPass<T>& pass,
                                           const Tensor<T>& logit_grad) {
    if (logit_grad.shape() != pass.logits.shape())
        throw ConfigError("logit gradient " + shape_string(logit_grad.shape()) + " does not match logits " +
                          shape_string(pass.logits.shape()));
    std::vector<LayerParams<T>> grads(model.layers.size());
    Tensor<T> upstream = logit_grad;
    for (std::size_t i = model.layers.size(); i-- > 0;) {
        LayerGradients<T> g = layer_backward(model.layers[i], model.params[i], pass.caches[i], upstream, i);
        grads[i] = std::move(g.params);
        upstream = std::move(g.input);
    }
    return grads;
}

template <class T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ConfigError("logits must be [batch, classes], got " + shape_string(logits.shape()));
    const std::size_t classes = logits.dim(1);
    std::vector<std::size_t> out(logits.dim(0), 0);
    for (std::size_t b = 0; b < out.size(); ++b) {
        const T* row = logits.data() + b * classes;
        std::size_t best = 0;
        for (std::size_t k = 1; k < classes; ++k)
            if (row[k] > row[best]) best = k;
        out[b] = best;
    }
    return out;
}

template <class T>
Prediction<T> predict_batch(const ModelState<T>& model, const Tensor<T>& inputs) {
    Prediction<T> out;
    out.logits = model_forward(model, inputs).logits;
    out.classes = argmax_rows(out.logits);
    return out;
}

template <class T>
void sgd_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config) {
    config.validate();
    const auto g = gradient_tensors(model, grads);
    prepare_state(model, OptimizerKind::sgd);
    auto params = parameter_tensors(model);
    const T lr = static_cast<T>(config.learning_rate);
    const T mu = static_cast<T>(config.momentum);
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor<T>& p = *params[t];
        Tensor<T>& buf = model.optimizer.first[t];
        for (std::size_t i = 0; i < p.size(); ++i) {
            buf[i] = mu * buf[i] + (*g[t])[i];
            p[i] -= lr * buf[i];
        }
    }
    ++model.step;
}

template <class T>
void adam_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config) {
    config.validate();
    const auto g = gradient_tensors(model, grads);
    prepare_state(model, OptimizerKind::adam);
    auto params = parameter_tensors(model);
    const double t = static_cast<double>(model.step + 1);
    const T b1 = static_cast<T>(config.beta1), b2 = static_cast<T>(config.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
    const T lr = static_cast<T>(config.learning_rate), eps = static_cast<T>(config.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<T>& p = *params[k];
        Tensor<T>& m = model.optimizer.first[k];
        Tensor<T>& v = model.optimizer.second[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const T gi = (*g[k])[i];
            m[i] = b1 * m[i] + (T{1} - b1) * gi;
            v[i] = b2 * v[i] + (T{1} - b2) * gi * gi;
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    ++model.step;
}

template <class T>
void optimizer_step(ModelState<T>& model, const std::vector<LayerParams<T>>& grads, const OptimizerConfig& config) {
    if (config.kind == OptimizerKind::adam)
        adam_step(model, grads, config);
    else
        sgd_step(model, grads, config);
}

template <class T>
StepResult<T> train_step(ModelState<T>& model, const Tensor<T>& inputs, std::span<const std::size_t> labels,
                         LossKind loss, const OptimizerConfig& config) {
    const ForwardPass<T> pass = model_forward(model, inputs);
    const LossResult<T> lr = loss_forward_backward(loss, pass.logits, labels);
    StepResult<T> out;
    out.loss = lr.loss;
    const auto predicted = argmax_rows(pass.logits);
    for (std::size_t i = 0; i < predicted.size(); ++i) out.correct += predicted[i] == labels[i];
    optimizer_step(model, model_backward(model, pass, lr.grad), config);
    return out;
}

#define SEQLEARN_INSTANTIATE(T)                                                                                    \
    template struct ModelState<T>;                                                                                 \
    template ModelState<T> build_model<T>(std::vector<LayerSpec>, const Shape&, std::uint64_t);                    \
    template ForwardPass<T> model_forward<T>(const ModelState<T>&, const Tensor<T>&);                             \
    template std::vector<LayerParams<T>> model_backward<T>(const ModelState<T>&, const ForwardPass<T>&,           \
                                                           const Tensor<T>&);                                      \
    template std::vector<std::size_t> argmax_rows<T>(const Tensor<T>&);                                            \
    template Prediction<T> predict_batch<T>(const ModelState<T>&, const Tensor<T>&);                              \
    template void sgd_step<T>(ModelState<T>&, const std::vector<LayerParams<T>>&, const OptimizerConfig&);        \
    template void adam_step<T>(ModelState<T>&, const std::vector<LayerParams<T>>&, const OptimizerConfig&);       \
    template void optimizer_step<T>(ModelState<T>&, const std::vector<LayerParams<T>>&, const OptimizerConfig&);  \
    template StepResult<T> train_step<T>(ModelState<T>&, const Tensor<T>&, std::span<const std::size_t>,          \
                                         LossKind, const OptimizerConfig&);

SEQLEARN_INSTANTIATE(float)
SEQLEARN_INSTANTIATE(double)
#undef SEQLEARN_INSTANTIATE

template ModelState<double> cast_model<float, double>(const ModelState<float>&);
template ModelState<float> cast_model<double, float>(const ModelState<double>&);
template ModelState<float> cast_model<float, float>(const ModelState<float>&);
template ModelState<double> cast_model<double, double>(const ModelState<double>&);

} // namespace seqlearn
