#include "seqlearn/layers.hpp"

#include <algorithm>
#include <type_traits>

namespace seqlearn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

[[noreturn]] void shape_mismatch(std::size_t index, const LayerSpec& spec, const std::string& expected,
                                 const Shape& actual) {
    throw ConfigError("layer " + std::to_string(index) + " (" + layer_name(spec) + "): expected input " + expected +
                      ", got " + shape_string(actual));
}

std::size_t conv_extent(std::size_t in, const Conv2dSpec& c) {
    const std::size_t padded = in + 2 * c.padding;
    if (padded < c.kernel) return 0;
    return (padded - c.kernel) / c.stride + 1;
}

// Checks a batched tensor against the per-sample input shape the layer expects.
Shape sample_shape(const Shape& batched) { return Shape(batched.begin() + (batched.empty() ? 0 : 1), batched.end()); }

template <class T>
void check_batched(const LayerSpec& spec, const Tensor<T>& input, std::size_t index) {
    if (input.rank() < 2 || input.dim(0) == 0) shape_mismatch(index, spec, "a non-empty batch", input.shape());
    layer_output_shape(spec, sample_shape(input.shape()), index);
}

} // namespace

std::string layer_name(const LayerSpec& spec) {
    return std::visit(Overloaded{
                          [](const Conv2dSpec&) { return std::string("Conv2d"); },
                          [](const DenseSpec&) { return std::string("Dense"); },
                          [](const ReluSpec&) { return std::string("ReLU"); },
                          [](const MaxPool2dSpec&) { return std::string("MaxPool2d"); },
                          [](const FlattenSpec&) { return std::string("Flatten"); },
                      },
                      spec);
}

std::string layer_to_string(const LayerSpec& spec) {
    return std::visit(Overloaded{
                          [](const Conv2dSpec& c) {
                              return "conv:" + std::to_string(c.out_channels) + ":" + std::to_string(c.kernel) + ":" +
                                     std::to_string(c.stride) + ":" + std::to_string(c.padding);
                          },
                          [](const DenseSpec& d) { return "dense:" + std::to_string(d.out_features); },
                          [](const ReluSpec&) { return std::string("relu"); },
                          [](const MaxPool2dSpec& m) { return "maxpool:" + std::to_string(m.kernel); },
                          [](const FlattenSpec&) { return std::string("flatten"); },
                      },
                      spec);
}

void validate_layer(const LayerSpec& spec, std::size_t index) {
    auto fail = [&](const std::string& what) {
        throw ConfigError("layer " + std::to_string(index) + " (" + layer_name(spec) + "): " + what);
    };
    std::visit(Overloaded{
                   [&](const Conv2dSpec& c) {
                       if (c.in_channels < 1 || c.out_channels < 1) fail("channel counts must be >= 1");
                       if (c.kernel < 1 || c.stride < 1) fail("kernel and stride must be >= 1");
                   },
                   [&](const DenseSpec& d) {
                       if (d.in_features < 1 || d.out_features < 1) fail("feature counts must be >= 1");
                   },
                   [&](const MaxPool2dSpec& m) {
                       if (m.kernel < 1) fail("kernel must be >= 1");
                   },
                   [](const auto&) {},
               },
               spec);
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t index) {
    validate_layer(spec, index);
    return std::visit(
        Overloaded{
            [&](const Conv2dSpec& c) -> Shape {
                const std::string expected = "[" + std::to_string(c.in_channels) + ",H,W]";
                if (in.size() != 3 || in[0] != c.in_channels) shape_mismatch(index, spec, expected, in);
                const std::size_t oh = conv_extent(in[1], c), ow = conv_extent(in[2], c);
                if (oh == 0 || ow == 0) shape_mismatch(index, spec, "spatial size >= kernel", in);
                return {c.out_channels, oh, ow};
            },
            [&](const DenseSpec& d) -> Shape {
                if (in.size() != 1 || in[0] != d.in_features)
                    shape_mismatch(index, spec, "[" + std::to_string(d.in_features) + "]", in);
                return {d.out_features};
            },
            [&](const ReluSpec&) -> Shape {
                if (in.empty()) shape_mismatch(index, spec, "rank >= 1", in);
                return in;
            },
            [&](const MaxPool2dSpec& m) -> Shape {
                if (in.size() != 3 || in[1] < m.kernel || in[2] < m.kernel)
                    shape_mismatch(index, spec, "[C,H,W] with H,W >= " + std::to_string(m.kernel), in);
                return {in[0], in[1] / m.kernel, in[2] / m.kernel};
            },
            [&](const FlattenSpec&) -> Shape {
                if (in.empty()) shape_mismatch(index, spec, "rank >= 1", in);
                return {shape_size(in)};
            },
        },
        spec);
}

template <class T>
LayerParams<T> make_layer_params(const LayerSpec& spec) {
    LayerParams<T> p;
    if (const auto* c = std::get_if<Conv2dSpec>(&spec)) {
        p.weight = Tensor<T>({c->out_channels, c->in_channels, c->kernel, c->kernel});
        p.bias = Tensor<T>({c->out_channels});
    } else if (const auto* d = std::get_if<DenseSpec>(&spec)) {
        p.weight = Tensor<T>({d->out_features, d->in_features});
        p.bias = Tensor<T>({d->out_features});
    }
    return p;
}

namespace {

template <class T>
void check_params(const LayerSpec& spec, const LayerParams<T>& params, std::size_t index) {
    const LayerParams<T> expected = make_layer_params<T>(spec);
    if (params.weight.shape() != expected.weight.shape() || params.bias.shape() != expected.bias.shape())
        throw ConfigError("layer " + std::to_string(index) + " (" + layer_name(spec) + "): parameter shapes " +
                          shape_string(params.weight.shape()) + "/" + shape_string(params.bias.shape()) +
                          " do not match " + shape_string(expected.weight.shape()) + "/" +
                          shape_string(expected.bias.shape()));
}

template <class T>
Tensor<T> conv_forward(const Conv2dSpec& c, const LayerParams<T>& p, const Tensor<T>& x) {
    const std::size_t batch = x.dim(0), cin = c.in_channels, h = x.dim(2), w = x.dim(3);
    const std::size_t oh = conv_extent(h, c), ow = conv_extent(w, c), k = c.kernel;
    Tensor<T> y({batch, c.out_channels, oh, ow});
    const T* in = x.data();
    const T* wt = p.weight.data();
    T* out = y.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < c.out_channels; ++o) {
            T* plane = out + ((b * c.out_channels + o) * oh) * ow;
            std::fill(plane, plane + oh * ow, p.bias[o]);
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const T* src = in + ((b * cin + ci) * h) * w;
                const T* ker = wt + ((o * cin + ci) * k) * k;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(c.padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* row = src + static_cast<std::size_t>(iy) * w;
                        T* dst = plane + oy * ow;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const T kv = ker[ky * k + kx];
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                                          static_cast<std::ptrdiff_t>(c.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                dst[ox] += kv * row[ix];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <class T>
LayerGradients<T> conv_backward(const Conv2dSpec& c, const LayerParams<T>& p, const Tensor<T>& x,
                                const Tensor<T>& dy) {
    const std::size_t batch = x.dim(0), cin = c.in_channels, h = x.dim(2), w = x.dim(3);
    const std::size_t oh = dy.dim(2), ow = dy.dim(3), k = c.kernel;
    LayerGradients<T> g{Tensor<T>(x.shape()), make_layer_params<T>(Conv2dSpec{c})};
    const T* in = x.data();
    const T* up = dy.data();
    const T* wt = p.weight.data();
    T* dx = g.input.data();
    T* dw = g.params.weight.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t o = 0; o < c.out_channels; ++o) {
            const T* grad = up + ((b * c.out_channels + o) * oh) * ow;
            T bsum = 0;
            for (std::size_t i = 0; i < oh * ow; ++i) bsum += grad[i];
            g.params.bias[o] += bsum;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const T* src = in + ((b * cin + ci) * h) * w;
                T* dsrc = dx + ((b * cin + ci) * h) * w;
                const T* ker = wt + ((o * cin + ci) * k) * k;
                T* dker = dw + ((o * cin + ci) * k) * k;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(c.padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        const T* row = src + static_cast<std::size_t>(iy) * w;
                        T* drow = dsrc + static_cast<std::size_t>(iy) * w;
                        const T* grow = grad + oy * ow;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const T kv = ker[ky * k + kx];
                            T wsum = 0;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                                          static_cast<std::ptrdiff_t>(c.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                                wsum += grow[ox] * row[ix];
                                drow[ix] += kv * grow[ox];
                            }
                            dker[ky * k + kx] += wsum;
                        }
                    }
                }
            }
        }
    }
    return g;
}

template <class T>
Tensor<T> dense_forward(const DenseSpec& d, const LayerParams<T>& p, const Tensor<T>& x) {
    const std::size_t batch = x.dim(0);
    Tensor<T> y({batch, d.out_features});
    for (std::size_t b = 0; b < batch; ++b) {
        const T* in = x.data() + b * d.in_features;
        for (std::size_t o = 0; o < d.out_features; ++o) {
            const T* row = p.weight.data() + o * d.in_features;
            T acc = p.bias[o];
            for (std::size_t i = 0; i < d.in_features; ++i) acc += row[i] * in[i];
            y[b * d.out_features + o] = acc;
        }
    }
    return y;
}

template <class T>
LayerGradients<T> dense_backward(const DenseSpec& d, const LayerParams<T>& p, const Tensor<T>& x,
                                 const Tensor<T>& dy) {
    const std::size_t batch = x.dim(0);
    LayerGradients<T> g{Tensor<T>(x.shape()), make_layer_params<T>(DenseSpec{d})};
    for (std::size_t b = 0; b < batch; ++b) {
        const T* in = x.data() + b * d.in_features;
        T* din = g.input.data() + b * d.in_features;
        for (std::size_t o = 0; o < d.out_features; ++o) {
            const T go = dy[b * d.out_features + o];
            const T* row = p.weight.data() + o * d.in_features;
            T* drow = g.params.weight.data() + o * d.in_features;
            g.params.bias[o] += go;
            for (std::size_t i = 0; i < d.in_features; ++i) {
                drow[i] += go * in[i];
                din[i] += go * row[i];
            }
        }
    }
    return g;
}

template <class T>
Tensor<T> maxpool_forward(const MaxPool2dSpec& m, const Tensor<T>& x, std::vector<std::size_t>& argmax) {
    const std::size_t batch = x.dim(0), ch = x.dim(1), h = x.dim(2), w = x.dim(3), k = m.kernel;
    const std::size_t oh = h / k, ow = w / k;
    Tensor<T> y({batch, ch, oh, ow});
    argmax.assign(y.size(), 0);
    std::size_t out = 0;
    for (std::size_t bc = 0; bc < batch * ch; ++bc) {
        const std::size_t base = bc * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++out) {
                std::size_t best = base + (oy * k) * w + ox * k;
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::size_t idx = base + (oy * k + ky) * w + ox * k + kx;
                        if (x[idx] > x[best]) best = idx;  // first maximum wins ties
                    }
                y[out] = x[best];
                argmax[out] = best;
            }
        }
    }
    return y;
}

} // namespace

template <class T>
Tensor<T> layer_forward(const LayerSpec& spec, const LayerParams<T>& params, const Tensor<T>& input,
                        LayerCache<T>& cache, std::size_t index) {
    check_batched(spec, input, index);
    check_params(spec, params, index);
    cache.argmax.clear();
    cache.input = Tensor<T>();
    cache.input_shape = input.shape();
    return std::visit(Overloaded{
                          [&](const Conv2dSpec& c) {
                              cache.input = input;
                              return conv_forward(c, params, input);
                          },
                          [&](const DenseSpec& d) {
                              cache.input = input;
                              return dense_forward(d, params, input);
                          },
                          [&](const ReluSpec&) {
                              cache.input = input;
                              Tensor<T> y = input;
                              for (T& v : y.values()) v = v > T{0} ? v : T{0};
                              return y;
                          },
                          [&](const MaxPool2dSpec& m) {
                              return maxpool_forward(m, input, cache.argmax);
                          },
                          [&](const FlattenSpec&) {
                              return input.reshaped({input.dim(0), input.size() / input.dim(0)});
                          },
                      },
                      spec);
}

template <class T>
LayerGradients<T> layer_backward(const LayerSpec& spec, const LayerParams<T>& params, const LayerCache<T>& cache,
                                 const Tensor<T>& upstream, std::size_t index) {
    check_params(spec, params, index);
    return std::visit(
        Overloaded{
            [&](const Conv2dSpec& c) {
                check_batched(spec, cache.input, index);
                Shape expected = cache.input.shape();
                expected[1] = c.out_channels;
                expected[2] = conv_extent(cache.input.dim(2), c);
                expected[3] = conv_extent(cache.input.dim(3), c);
                if (upstream.shape() != expected) shape_mismatch(index, spec, "upstream " + shape_string(expected), upstream.shape());
                return conv_backward(c, params, cache.input, upstream);
            },
            [&](const DenseSpec& d) {
                check_batched(spec, cache.input, index);
                const Shape expected{cache.input.dim(0), d.out_features};
                if (upstream.shape() != expected) shape_mismatch(index, spec, "upstream " + shape_string(expected), upstream.shape());
                return dense_backward(d, params, cache.input, upstream);
            },
            [&](const ReluSpec&) {
                if (upstream.shape() != cache.input.shape())
                    shape_mismatch(index, spec, "upstream " + shape_string(cache.input.shape()), upstream.shape());
                LayerGradients<T> g{Tensor<T>(upstream.shape()), {}};
                for (std::size_t i = 0; i < upstream.size(); ++i)
                    g.input[i] = cache.input[i] > T{0} ? upstream[i] : T{0};
                return g;
            },
            [&](const MaxPool2dSpec&) {
                if (upstream.size() != cache.argmax.size())
                    shape_mismatch(index, spec, "upstream with " + std::to_string(cache.argmax.size()) + " elements",
                                   upstream.shape());
                LayerGradients<T> g{Tensor<T>(cache.input_shape), {}};
                for (std::size_t i = 0; i < upstream.size(); ++i) g.input[cache.argmax[i]] += upstream[i];
                return g;
            },
            [&](const FlattenSpec&) {
                if (upstream.size() != shape_size(cache.input_shape))
                    shape_mismatch(index, spec, "upstream with " + std::to_string(shape_size(cache.input_shape)) +
                                   " elements", upstream.shape());
                return LayerGradients<T>{upstream.reshaped(cache.input_shape), {}};
            },
        },
        spec);
}

template LayerParams<float> make_layer_params<float>(const LayerSpec&);
template LayerParams<double> make_layer_params<double>(const LayerSpec&);
template Tensor<float> layer_forward<float>(const LayerSpec&, const LayerParams<float>&, const Tensor<float>&,
                                            LayerCache<float>&, std::size_t);
template Tensor<double> layer_forward<double>(const LayerSpec&, const LayerParams<double>&, const Tensor<double>&,
                                              LayerCache<double>&, std::size_t);
template LayerGradients<float> layer_backward<float>(const LayerSpec&, const LayerParams<float>&,
                                                     const LayerCache<float>&, const Tensor<float>&, std::size_t);
template LayerGradients<double> layer_backward<double>(const LayerSpec&, const LayerParams<double>&,
                                                       const LayerCache<double>&, const Tensor<double>&, std::size_t);

} // namespace seqlearn
