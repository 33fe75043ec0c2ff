#include "seqlearn/schedule.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "seqlearn/error.hpp"
#include "seqlearn/fileio.hpp"
#include "seqlearn/rng.hpp"

namespace seqlearn {

std::size_t DayPlan::total_entries() const {
    std::size_t n = 0;
    for (const auto& d : days) n += d.size();
    return n;
}

DayPlan plan_days(std::span<const std::size_t> pool, const PlanOptions& options) {
    if (options.n_per_day < 1) throw ConfigError("schedule.n_per_day must be >= 1");
    if (options.total_days < 1) throw ConfigError("schedule.days must be >= 1");
    const std::size_t demand = options.n_per_day * options.total_days;
    if (demand > pool.size()) {
        const bool short_ok = options.allow_short_final_day && demand - pool.size() < options.n_per_day;
        if (!short_ok)
            throw DataError("day plan needs " + std::to_string(demand) + " entries (" +
                            std::to_string(options.total_days) + " days x " + std::to_string(options.n_per_day) +
                            ") but only " + std::to_string(pool.size()) + " are available; shortfall " +
                            std::to_string(demand - pool.size()));
    }
    std::vector<std::size_t> order(pool.begin(), pool.end());
    if (std::set<std::size_t>(order.begin(), order.end()).size() != order.size())
        throw UsageError("day plan pool contains duplicate indices");
    Rng rng(options.seed, Stream::plan);
    rng.shuffle(std::span<std::size_t>(order));

    DayPlan plan;
    plan.n_per_day = options.n_per_day;
    for (std::size_t d = 0; d < options.total_days; ++d) {
        const std::size_t begin = d * options.n_per_day;
        const std::size_t end = std::min(begin + options.n_per_day, order.size());
        plan.days.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                               order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

DayPlan plan_days(std::size_t manifest_size, const PlanOptions& options) {
    std::vector<std::size_t> all(manifest_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return plan_days(all, options);
}

std::string dayplan_to_text(const DayPlan& plan) {
    std::string out = "#n_per_day:\t" + std::to_string(plan.n_per_day) + "\n";
    for (std::size_t d = 0; d < plan.days.size(); ++d) {
        out += std::to_string(d + 1) + '\t';
        for (std::size_t i = 0; i < plan.days[d].size(); ++i) out += (i ? "," : "") + std::to_string(plan.days[d][i]);
        out += '\n';
    }
    return out;
}

DayPlan dayplan_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#n_per_day:\t", 0) != 0)
        throw ParseError("day plan: missing '#n_per_day:' header", 1);
    DayPlan plan;
    try {
        plan.n_per_day = std::stoul(line.substr(12));
    } catch (const std::exception&) {
        throw ParseError("day plan: bad n_per_day", 1);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("day plan: expected 'day<TAB>indices'", line_no);
        try {
            if (std::stoul(line.substr(0, tab)) != plan.days.size() + 1)
                throw ParseError("day plan: days must be consecutive from 1", line_no);
            std::vector<std::size_t> idx;
            std::istringstream items(line.substr(tab + 1));
            std::string item;
            while (std::getline(items, item, ',')) idx.push_back(std::stoul(item));
            plan.days.push_back(std::move(idx));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception&) {
            throw ParseError("day plan: bad integer", line_no);
        }
    }
    return plan;
}

void write_dayplan(const DayPlan& plan, const std::filesystem::path& path) { write_file_text(path, dayplan_to_text(plan)); }

DayPlan read_dayplan(const std::filesystem::path& path) { return dayplan_from_text(read_file_text(path)); }

std::string to_string(ValidationStrategy s) {
    switch (s) {
    case ValidationStrategy::global_holdout: return "global_holdout";
    case ValidationStrategy::prev_train_curr_val: return "prev_train_curr_val";
    case ValidationStrategy::half_split: return "half_split";
    }
    return "?";
}

ValidationStrategy parse_validation_strategy(const std::string& text) {
    if (text == "global_holdout" || text == "global") return ValidationStrategy::global_holdout;
    if (text == "prev_train_curr_val" || text == "A" || text == "a") return ValidationStrategy::prev_train_curr_val;
    if (text == "half_split" || text == "B" || text == "b") return ValidationStrategy::half_split;
    throw ConfigError("unknown validation strategy '" + text +
                      "' (expected global_holdout, prev_train_curr_val or half_split)");
}

HalfPartition half_partition(std::span<const std::size_t> batch, std::size_t day, std::uint64_t seed) {
    if (batch.size() % 2 != 0)
        throw ConfigError("half_split needs an even number of images per day, got " + std::to_string(batch.size()));
    std::vector<std::size_t> positions(batch.size());
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    Rng rng(seed, Stream::half_split, {day});
    rng.shuffle(std::span<std::size_t>(positions));
    std::vector<bool> is_train(batch.size(), false);
    for (std::size_t i = 0; i < batch.size() / 2; ++i) is_train[positions[i]] = true;
    HalfPartition out;
    for (std::size_t i = 0; i < batch.size(); ++i) (is_train[i] ? out.train : out.held_out).push_back(batch[i]);
    return out;
}

DaySplit day_split(ValidationStrategy strategy, std::size_t day, std::span<const std::size_t> prev,
                   std::span<const std::size_t> curr, std::uint64_t seed) {
    if (day < 1) throw UsageError("days are numbered from 1");
    DaySplit out;
    switch (strategy) {
    case ValidationStrategy::global_holdout:
        out.train.assign(curr.begin(), curr.end());
        out.global_validation = true;
        break;
    case ValidationStrategy::prev_train_curr_val:
        if (day > 1) out.train.assign(prev.begin(), prev.end());
        out.validation.assign(curr.begin(), curr.end());
        break;
    case ValidationStrategy::half_split: {
        HalfPartition today = half_partition(curr, day, seed);
        out.train = std::move(today.train);
        if (day > 1) {
            const HalfPartition yesterday = half_partition(prev, day - 1, seed);
            out.train.insert(out.train.end(), yesterday.held_out.begin(), yesterday.held_out.end());
        }
        out.validation = std::move(today.held_out);
        break;
    }
    }
    return out;
}

} // namespace seqlearn
