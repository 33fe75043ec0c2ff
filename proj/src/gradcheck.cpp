#include "seqlearn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "seqlearn/rng.hpp"

namespace seqlearn {

bool GradCheckReport::passed() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const TensorCheck& t) { return t.passed; });
}

double GradCheckReport::max_rel_error() const {
    double m = 0.0;
    for (const auto& t : tensors) m = std::max(m, t.max_rel_error);
    return m;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / denom;
}

double central_difference(double plus_h, double minus_h, double plus_2h, double minus_2h, double h) {
    return (8.0 * (plus_h - minus_h) - (plus_2h - minus_2h)) / (12.0 * h);
}

std::vector<LayerParams<double>> backprop_gradients(const ModelState<double>& model, const Tensor<double>& inputs,
                                                    std::span<const std::size_t> labels, LossKind loss) {
    const auto pass = model_forward(model, inputs);
    const auto lr = loss_forward_backward(loss, pass.logits, labels);
    return model_backward(model, pass, lr.grad);
}

namespace {

struct Probe {
    double value = 0.0;
    std::vector<std::size_t> pattern;  // ReLU signs and max-pool winners
};

void append_pattern(const LayerSpec& spec, const LayerCache<double>& cache, std::vector<std::size_t>& pattern) {
    if (std::holds_alternative<ReluSpec>(spec))
        for (double v : cache.input.values()) pattern.push_back(v > 0.0);
    else if (std::holds_alternative<MaxPool2dSpec>(spec))
        pattern.insert(pattern.end(), cache.argmax.begin(), cache.argmax.end());
}

Probe model_probe(const ModelState<double>& model, const Tensor<double>& inputs, std::span<const std::size_t> labels,
                  LossKind loss) {
    const auto pass = model_forward(model, inputs);
    Probe p;
    p.value = loss_forward_backward(loss, pass.logits, labels).loss;
    for (std::size_t i = 0; i < model.layers.size(); ++i) append_pattern(model.layers[i], pass.caches[i], p.pattern);
    return p;
}

template <class Objective>
TensorCheck check_tensor(std::string name, Tensor<double>& target, const Tensor<double>& analytic, double h,
                         double tolerance, bool& smooth, Objective&& objective) {
    TensorCheck out{std::move(name), 0.0, true};
    const std::vector<std::size_t> base = objective().pattern;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double saved = target[i];
        double f[4];
        const double offsets[4] = {h, -h, 2.0 * h, -2.0 * h};
        for (int k = 0; k < 4; ++k) {
            target[i] = saved + offsets[k];
            Probe p = objective();
            f[k] = p.value;
            if (p.pattern != base) smooth = false;
        }
        target[i] = saved;
        const double numeric = central_difference(f[0], f[1], f[2], f[3], h);
        out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric));
    }
    out.passed = out.max_rel_error < tolerance;
    return out;
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (double& v : t.values()) v = scale * rng.normal();
    return t;
}

} // namespace

GradCheckReport grad_check_model(const ModelState<double>& model, const Tensor<double>& inputs,
                                 std::span<const std::size_t> labels, LossKind loss, double h, double tolerance,
                                 const AnalyticGradients& analytic) {
    GradCheckReport report;
    report.tolerance = tolerance;
    const auto grads = analytic(model, inputs, labels, loss);
    ModelState<double> probe = model;
    for (std::size_t i = 0; i < probe.params.size(); ++i) {
        if (!probe.params[i].has_params()) continue;
        const std::string prefix = "layer" + std::to_string(i) + "." + layer_name(probe.layers[i]);
        auto objective = [&] { return model_probe(probe, inputs, labels, loss); };
        report.tensors.push_back(check_tensor(prefix + ".weight", probe.params[i].weight, grads[i].weight, h, tolerance,
                                              report.smooth, objective));
        report.tensors.push_back(check_tensor(prefix + ".bias", probe.params[i].bias, grads[i].bias, h, tolerance,
                                              report.smooth, objective));
    }
    return report;
}

GradCheckReport grad_check_layer(const LayerSpec& spec, const LayerParams<double>& params,
                                 const Tensor<double>& input, double h, double tolerance, std::uint64_t seed) {
    GradCheckReport report;
    report.tolerance = tolerance;
    LayerCache<double> cache;
    const Tensor<double> out = layer_forward(spec, params, input, cache);
    Rng rng(seed);
    const Tensor<double> projection = random_tensor(out.shape(), rng);
    const LayerGradients<double> g = layer_backward(spec, params, cache, projection);

    Tensor<double> x = input;
    LayerParams<double> p = params;
    auto objective = [&] {
        LayerCache<double> scratch;
        const Tensor<double> y = layer_forward(spec, p, x, scratch);
        Probe probe;
        for (std::size_t i = 0; i < y.size(); ++i) probe.value += projection[i] * y[i];
        append_pattern(spec, scratch, probe.pattern);
        return probe;
    };
    const std::string prefix = layer_name(spec);
    report.tensors.push_back(check_tensor(prefix + ".input", x, g.input, h, tolerance, report.smooth, objective));
    if (p.has_params()) {
        report.tensors.push_back(
            check_tensor(prefix + ".weight", p.weight, g.params.weight, h, tolerance, report.smooth, objective));
        report.tensors.push_back(
            check_tensor(prefix + ".bias", p.bias, g.params.bias, h, tolerance, report.smooth, objective));
    }
    return report;
}

GradCheckReport grad_check_suite(const GradCheckSuiteOptions& options) {
    constexpr std::size_t kMaxRedraws = 50;
    GradCheckReport report;
    report.tolerance = options.tolerance;
    auto append = [&](const GradCheckReport& part, const std::string& tag) {
        for (TensorCheck t : part.tensors) {
            t.name = tag + "/" + t.name;
            report.tensors.push_back(std::move(t));
        }
        report.smooth = report.smooth && part.smooth;
    };
    for (std::size_t s = 0; s < options.seeds; ++s) {
        const std::uint64_t seed = options.base_seed + s;
        const std::string tag = "seed" + std::to_string(seed);
        Rng rng(seed, Stream::init, {0xC0FFEE});

        const std::vector<LayerSpec> standalone = {
            Conv2dSpec{2, 3, 3, 1, 1}, Conv2dSpec{2, 2, 2, 2, 0}, Conv2dSpec{1, 2, 3, 2, 1},
            DenseSpec{7, 4},           ReluSpec{},                MaxPool2dSpec{2},
            FlattenSpec{},
        };
        for (const LayerSpec& spec : standalone) {
            Shape in{2, 6, 6};
            if (const auto* c = std::get_if<Conv2dSpec>(&spec)) in[0] = c->in_channels;
            if (std::holds_alternative<DenseSpec>(spec)) in = {7};
            Shape batched{3};
            batched.insert(batched.end(), in.begin(), in.end());
            for (std::size_t attempt = 0;; ++attempt) {
                LayerParams<double> params = make_layer_params<double>(spec);
                for (double& v : params.weight.values()) v = 0.5 * rng.normal();
                for (double& v : params.bias.values()) v = 0.1 * rng.normal();
                const Tensor<double> input = random_tensor(batched, rng);
                const auto part = grad_check_layer(spec, params, input, options.h, options.tolerance, rng.next());
                if (part.smooth || attempt + 1 == kMaxRedraws) {
                    append(part, tag);
                    break;
                }
                ++report.redraws;
            }
        }

        for (LossKind loss : {LossKind::softmax_cross_entropy, LossKind::bce_with_logits}) {
            const Shape input_shape{1, 8, 8};
            const auto layers = parse_layers("conv:3:3:1:1,relu,maxpool:2,conv:4:3:1:0,relu,flatten,dense:5,relu,dense:3");
            for (std::size_t attempt = 0;; ++attempt) {
                const auto model = build_model<double>(layers, input_shape, rng.next());
                const Tensor<double> inputs = random_tensor({4, 1, 8, 8}, rng);
                std::vector<std::size_t> labels(4);
                for (auto& l : labels) l = rng.below(3);
                const auto part = grad_check_model(model, inputs, labels, loss, options.h, options.tolerance);
                if (part.smooth || attempt + 1 == kMaxRedraws) {
                    append(part, tag + "/" + to_string(loss));
                    break;
                }
                ++report.redraws;
            }
        }
    }
    return report;
}

} // namespace seqlearn
