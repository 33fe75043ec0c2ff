#pragma once

// Day-by-day data arrival and the day-local train/validation constructions.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace seqlearn {

/// Entry indices (into the training manifest) arriving on each day, drawn without replacement.
struct DayPlan {
    std::size_t n_per_day = 0;
    std::vector<std::vector<std::size_t>> days;  // days[0] is day 1

    std::size_t total_entries() const;
    friend bool operator==(const DayPlan&, const DayPlan&) = default;
};

struct PlanOptions {
    std::size_t n_per_day = 20;
    std::size_t total_days = 1;
    std::uint64_t seed = 0;
    bool allow_short_final_day = false;  // otherwise a shortfall is an error
};

// Seeded shuffle of `pool`, cut into consecutive blocks of n_per_day.
DayPlan plan_days(std::span<const std::size_t> pool, const PlanOptions& options);

// Plans over every index of a manifest of the given size.
DayPlan plan_days(std::size_t manifest_size, const PlanOptions& options);

// "#n_per_day:\tN" header, then "day<TAB>i,j,k" per day.
std::string dayplan_to_text(const DayPlan& plan);
DayPlan dayplan_from_text(const std::string& text);
void write_dayplan(const DayPlan& plan, const std::filesystem::path& path);
DayPlan read_dayplan(const std::filesystem::path& path);

enum class ValidationStrategy {
    global_holdout,       // train on today's batch, validate on the global validation split
    prev_train_curr_val,  // strategy A: train on yesterday's batch, validate on today's
    half_split,           // strategy B: today's first half + yesterday's held-out half train, today's other half validates
};

std::string to_string(ValidationStrategy s);
ValidationStrategy parse_validation_strategy(const std::string& text);

struct DaySplit {
    std::vector<std::size_t> train;       // training-manifest indices
    std::vector<std::size_t> validation;  // training-manifest indices; empty under global_holdout
    bool global_validation = false;
};

// Half-split of one day's batch: the training half is a seeded sample of
// size n/2, the validation half is the rest (both in batch order).
struct HalfPartition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> held_out;
};
HalfPartition half_partition(std::span<const std::size_t> batch, std::size_t day, std::uint64_t seed);

// `day` is 1-based; `prev` is ignored on day 1. The half_split held-out half of
// the previous day is recomputed from `prev` with the same seed, so the split of
// any day depends only on (seed, day, prev, curr).
DaySplit day_split(ValidationStrategy strategy, std::size_t day, std::span<const std::size_t> prev,
                   std::span<const std::size_t> curr, std::uint64_t seed);

} // namespace seqlearn
