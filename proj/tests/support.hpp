#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "seqlearn/manifest.hpp"
#include "seqlearn/protocol.hpp"
#include "seqlearn/synth.hpp"

namespace testing {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("seqlearn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

private:
    std::filesystem::path path_;
};

// Synthetic dataset plus its split files under dir/data and dir/splits.
inline void make_dataset(const std::filesystem::path& dir, std::size_t per_class, std::size_t size = 16,
                         double noise = 0.1, std::uint64_t seed = 1, std::size_t classes = 3) {
    seqlearn::SynthOptions o;
    o.classes = classes;
    o.per_class = per_class;
    o.height = size;
    o.width = size;
    o.noise_level = noise;
    o.seed = seed;
    const auto m = seqlearn::gen_synthetic(o, dir / "data");
    seqlearn::write_split(seqlearn::split_manifest(m, {}, seed), dir / "splits");
}

// A small, fast configuration over make_dataset output.
inline seqlearn::ExperimentConfig small_config(const std::filesystem::path& dir) {
    seqlearn::ExperimentConfig c;
    c.layers = "conv:4:3:1:1,relu,maxpool:2,flatten,dense:3";
    c.optimizer.learning_rate = 1e-3;
    c.batch_size = 8;
    c.total_days = 6;
    c.n_per_day = 10;
    c.epochs_per_day = 2;
    c.checkpoint_every = 2;
    c.seed = 11;
    c.augment = {0.5, 5.0, 0.05, 0.05};
    c.data_root = dir / "data";
    c.splits_dir = dir / "splits";
    return c;
}

} // namespace testing
