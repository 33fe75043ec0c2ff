#include "seqlearn/config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"

namespace seqlearn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string real_text(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct Value {
    std::string text;
    std::string origin;  // "line 12", "environment", "command line", "default"
    std::filesystem::path base_dir;
};

class Applier {
public:
    Applier(const std::string& key, const Value& v) : key_(key), v_(v) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError(key_ + " (" + v_.origin + "): " + what + " '" + v_.text + "'");
    }

    double real() const {
        double out = 0;
        const char* b = v_.text.data();
        const char* e = b + v_.text.size();
        const auto res = std::from_chars(b, e, out);
        if (v_.text.empty() || res.ec != std::errc() || res.ptr != e) fail("expected a real number, got");
        return out;
    }

    std::size_t count() const {
        std::uint64_t out = 0;
        const char* b = v_.text.data();
        const char* e = b + v_.text.size();
        const auto res = std::from_chars(b, e, out);
        if (v_.text.empty() || res.ec != std::errc() || res.ptr != e) fail("expected a non-negative integer, got");
        return static_cast<std::size_t>(out);
    }

    std::size_t positive() const {
        const std::size_t n = count();
        if (n < 1) fail("must be >= 1, got");
        return n;
    }

    bool boolean() const {
        if (v_.text == "true" || v_.text == "1" || v_.text == "yes") return true;
        if (v_.text == "false" || v_.text == "0" || v_.text == "no") return false;
        fail("expected true or false, got");
    }

    std::filesystem::path path() const {
        if (v_.text.empty()) return {};
        std::filesystem::path p(v_.text);
        if (p.is_relative() && !v_.base_dir.empty()) p = v_.base_dir / p;
        return p.lexically_normal();
    }

    const std::string& text() const { return v_.text; }

    template <class F>
    auto guarded(F&& f) const {
        try {
            return f();
        } catch (const ConfigError& e) {
            throw ConfigError(key_ + " (" + v_.origin + "): " + e.what());
        }
    }

private:
    const std::string& key_;
    const Value& v_;
};

struct KeyDef {
    ConfigKey key;
    std::function<void(ExperimentConfig&, const Applier&)> apply;
    std::function<std::string(const ExperimentConfig&)> echo;
};

const std::vector<KeyDef>& key_defs() {
    static const std::vector<KeyDef> defs = [] {
        std::vector<KeyDef> d;
        auto add = [&](std::string name, std::optional<std::string> def, std::string desc,
                       std::function<void(ExperimentConfig&, const Applier&)> apply,
                       std::function<std::string(const ExperimentConfig&)> echo) {
            d.push_back({{std::move(name), std::move(def), std::move(desc)}, std::move(apply), std::move(echo)});
        };
        auto sz = [](std::size_t v) { return std::to_string(v); };
        auto yn = [](bool v) { return std::string(v ? "true" : "false"); };

        add("model.layers", "", "explicit layer stack, e.g. conv:16:3:1:1,relu,maxpool:2,flatten,dense:3",
            [](auto& c, const auto& a) {
                c.layers = a.text();
                if (!c.layers.empty()) a.guarded([&] { return parse_layers(c.layers); });
            },
            [](const auto& c) { return c.layers; });
        add("model.conv_channels", "16", "channels per conv block of the default CNN",
            [](auto& c, const auto& a) { c.conv_channels = a.positive(); }, [=](const auto& c) { return sz(c.conv_channels); });
        add("model.conv_blocks", "2", "conv+relu+maxpool blocks of the default CNN",
            [](auto& c, const auto& a) { c.conv_blocks = a.count(); }, [=](const auto& c) { return sz(c.conv_blocks); });
        add("model.kernel", "3", "conv kernel size of the default CNN",
            [](auto& c, const auto& a) { c.kernel = a.positive(); }, [=](const auto& c) { return sz(c.kernel); });

        add("optimizer.kind", "adam", "adam or sgd",
            [](auto& c, const auto& a) { c.optimizer.kind = a.guarded([&] { return parse_optimizer_kind(a.text()); }); },
            [](const auto& c) { return to_string(c.optimizer.kind); });
        add("optimizer.lr", std::nullopt, "learning rate (required)",
            [](auto& c, const auto& a) { c.optimizer.learning_rate = a.real(); },
            [](const auto& c) { return real_text(c.optimizer.learning_rate); });
        add("optimizer.beta1", "0.9", "Adam first-moment decay",
            [](auto& c, const auto& a) { c.optimizer.beta1 = a.real(); }, [](const auto& c) { return real_text(c.optimizer.beta1); });
        add("optimizer.beta2", "0.999", "Adam second-moment decay",
            [](auto& c, const auto& a) { c.optimizer.beta2 = a.real(); }, [](const auto& c) { return real_text(c.optimizer.beta2); });
        add("optimizer.epsilon", "1e-08", "Adam denominator epsilon",
            [](auto& c, const auto& a) { c.optimizer.epsilon = a.real(); }, [](const auto& c) { return real_text(c.optimizer.epsilon); });
        add("optimizer.momentum", "0", "SGD momentum",
            [](auto& c, const auto& a) { c.optimizer.momentum = a.real(); }, [](const auto& c) { return real_text(c.optimizer.momentum); });

        add("protocol.loss", "cross_entropy", "cross_entropy or bce_with_logits",
            [](auto& c, const auto& a) { c.loss = a.guarded([&] { return parse_loss_kind(a.text()); }); },
            [](const auto& c) { return to_string(c.loss); });
        add("protocol.batch_size", "16", "mini-batch size",
            [](auto& c, const auto& a) { c.batch_size = a.positive(); }, [=](const auto& c) { return sz(c.batch_size); });
        add("protocol.pretrain", "false", "run a pre-training phase before the days",
            [](auto& c, const auto& a) {
                if (a.boolean()) { if (!c.pretrain) c.pretrain = PretrainConfig{}; }
                else c.pretrain.reset();
            },
            [=](const auto& c) { return yn(c.pretrain.has_value()); });
        add("protocol.pretrain_size", "500", "images reserved for pre-training",
            [](auto& c, const auto& a) { if (c.pretrain) c.pretrain->subset_size = a.positive(); },
            [=](const auto& c) { return sz(c.pretrain ? c.pretrain->subset_size : PretrainConfig{}.subset_size); });
        add("protocol.pretrain_epochs", "5", "pre-training epoch cap",
            [](auto& c, const auto& a) { if (c.pretrain) c.pretrain->epoch_cap = a.positive(); },
            [=](const auto& c) { return sz(c.pretrain ? c.pretrain->epoch_cap : PretrainConfig{}.epoch_cap); });
        add("protocol.pretrain_target", "0.7", "validation accuracy that ends pre-training early",
            [](auto& c, const auto& a) { if (c.pretrain) c.pretrain->target_accuracy = a.real(); },
            [](const auto& c) { return real_text(c.pretrain ? c.pretrain->target_accuracy : PretrainConfig{}.target_accuracy); });
        add("protocol.checkpoint_every", "25", "checkpoint cadence in days (0 = final only)",
            [](auto& c, const auto& a) { c.checkpoint_every = a.count(); }, [=](const auto& c) { return sz(c.checkpoint_every); });
        add("protocol.seed", "0", "seed for every random stream",
            [](auto& c, const auto& a) { c.seed = a.count(); }, [](const auto& c) { return std::to_string(c.seed); });

        add("schedule.days", "10", "number of days",
            [](auto& c, const auto& a) { c.total_days = a.positive(); }, [=](const auto& c) { return sz(c.total_days); });
        add("schedule.n_per_day", "20", "images arriving per day",
            [](auto& c, const auto& a) { c.n_per_day = a.positive(); }, [=](const auto& c) { return sz(c.n_per_day); });
        add("schedule.epochs_per_day", "1", "day-epochs",
            [](auto& c, const auto& a) { c.epochs_per_day = a.positive(); }, [=](const auto& c) { return sz(c.epochs_per_day); });
        add("schedule.strategy", "global_holdout", "global_holdout, prev_train_curr_val (A) or half_split (B)",
            [](auto& c, const auto& a) { c.strategy = a.guarded([&] { return parse_validation_strategy(a.text()); }); },
            [](const auto& c) { return to_string(c.strategy); });
        add("schedule.allow_short_final_day", "false", "permit a short last day instead of failing",
            [](auto& c, const auto& a) { c.allow_short_final_day = a.boolean(); },
            [=](const auto& c) { return yn(c.allow_short_final_day); });

        add("data.root", "", "dataset root holding one directory per class",
            [](auto& c, const auto& a) { c.data_root = a.path(); }, [](const auto& c) { return c.data_root.string(); });
        add("data.splits", "", "directory with train.txt, val.txt and test.txt",
            [](auto& c, const auto& a) { c.splits_dir = a.path(); }, [](const auto& c) { return c.splits_dir.string(); });
        add("data.hflip", "0.5", "horizontal flip probability",
            [](auto& c, const auto& a) { c.augment.hflip_probability = a.real(); },
            [](const auto& c) { return real_text(c.augment.hflip_probability); });
        add("data.rotation", "5", "max rotation in degrees",
            [](auto& c, const auto& a) { c.augment.rotation_degrees = a.real(); },
            [](const auto& c) { return real_text(c.augment.rotation_degrees); });
        add("data.translate", "0.05", "max translation as a fraction of the image size",
            [](auto& c, const auto& a) { c.augment.translate_fraction = a.real(); },
            [](const auto& c) { return real_text(c.augment.translate_fraction); });
        add("data.jitter", "0.05", "max brightness jitter fraction",
            [](auto& c, const auto& a) { c.augment.jitter_fraction = a.real(); },
            [](const auto& c) { return real_text(c.augment.jitter_fraction); });
        add("data.norm_mean", "0.449", "normalisation mean",
            [](auto& c, const auto& a) { c.normalization.mean = {a.real()}; },
            [](const auto& c) { return real_text(c.normalization.mean.at(0)); });
        add("data.norm_std", "0.226", "normalisation standard deviation",
            [](auto& c, const auto& a) { c.normalization.stddev = {a.real()}; },
            [](const auto& c) { return real_text(c.normalization.stddev.at(0)); });

        add("detectors.window", "20", "plateau window length",
            [](auto& c, const auto& a) { c.detectors.window = a.count(); }, [=](const auto& c) { return sz(c.detectors.window); });
        add("detectors.slope_tolerance", "0.002", "max |slope| per series step inside a plateau",
            [](auto& c, const auto& a) { c.detectors.slope_tolerance = a.real(); },
            [](const auto& c) { return real_text(c.detectors.slope_tolerance); });
        add("detectors.variance_tolerance", "0.0015", "max variance inside a plateau",
            [](auto& c, const auto& a) { c.detectors.variance_tolerance = a.real(); },
            [](const auto& c) { return real_text(c.detectors.variance_tolerance); });
        add("detectors.spike_drop", "0.15", "accuracy drop flagged as a forgetting event",
            [](auto& c, const auto& a) { c.detectors.spike_drop = a.real(); },
            [](const auto& c) { return real_text(c.detectors.spike_drop); });
        return d;
    }();
    return defs;
}

} // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& d : key_defs()) k.push_back(d.key);
        return k;
    }();
    return keys;
}

std::string environment_name(const std::string& key) {
    std::string out = "SEQLEARN_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

ExperimentConfig parse_config(const ConfigSources& sources) {
    std::map<std::string, const KeyDef*> table;
    for (const auto& d : key_defs()) table[d.key.name] = &d;

    std::map<std::string, Value> values;
    for (const auto& d : key_defs())
        if (d.key.default_value) values[d.key.name] = {*d.key.default_value, "default", {}};

    std::istringstream in(sources.file_text);
    std::string raw, section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("bad section header at " + where);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value at " + where);
        std::string key = trim(line.substr(0, eq));
        if (key == "layout_version" && section.empty()) {
            if (trim(line.substr(eq + 1)) != std::to_string(kRunLayoutVersion))
                throw ConfigError("layout_version " + trim(line.substr(eq + 1)) + " at " + where +
                                  " is not supported (expected " + std::to_string(kRunLayoutVersion) + ")");
            continue;
        }
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        if (!table.count(key)) throw ConfigError("unknown key '" + key + "' at " + where);
        values[key] = {trim(line.substr(eq + 1)), where, sources.base_dir};
    }
    if (sources.use_environment)
        for (const auto& d : key_defs())
            if (const char* env = std::getenv(environment_name(d.key.name).c_str()))
                values[d.key.name] = {env, "environment " + environment_name(d.key.name), std::filesystem::current_path()};
    for (const auto& [key, text] : sources.overrides) {
        if (!table.count(key)) throw ConfigError("unknown key '" + key + "' on the command line");
        values[key] = {text, "command line", std::filesystem::current_path()};
    }

    ExperimentConfig config;
    // protocol.pretrain must be applied before its dependent keys; table order guarantees it.
    for (const auto& d : key_defs()) {
        const auto it = values.find(d.key.name);
        if (it == values.end()) throw ConfigError("missing required key '" + d.key.name + "'");
        d.apply(config, Applier(d.key.name, it->second));
    }
    config.validate();
    return config;
}

ExperimentConfig parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides,
                              bool use_environment) {
    ConfigSources sources;
    sources.file_text = read_file_text(path);
    sources.base_dir = std::filesystem::absolute(path).parent_path();
    sources.use_environment = use_environment;
    sources.overrides = overrides;
    return parse_config(sources);
}

std::string config_to_text(const ExperimentConfig& config) {
    std::string out = "layout_version=" + std::to_string(kRunLayoutVersion) + "\n";
    for (const auto& d : key_defs()) out += d.key.name + "=" + d.echo(config) + "\n";
    return out;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_to_text(config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace seqlearn
