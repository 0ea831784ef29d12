#include "segpipe/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

#include "segpipe/errors.hpp"

namespace segpipe {

std::string to_string(TuneObjective objective) {
    switch (objective) {
        case TuneObjective::kLesionDice: return "lesion_dice";
        case TuneObjective::kLegacyDice: return "legacy_dice";
        case TuneObjective::kComposite: return "composite";
    }
    throw std::logic_error("unreachable objective");
}

TuneObjective tune_objective_from_string(const std::string& name) {
    if (name == "lesion_dice") return TuneObjective::kLesionDice;
    if (name == "legacy_dice") return TuneObjective::kLegacyDice;
    if (name == "composite") return TuneObjective::kComposite;
    throw ValidationError("unknown objective '" + name +
                          "'; expected lesion_dice, legacy_dice or composite");
}

namespace {

template <typename T>
std::vector<T> or_default(const std::vector<T>& values, T fallback) {
    if (values.empty()) return {fallback};
    return values;
}

} // namespace

int64_t SearchGrid::candidate_count() const {
    const auto dim = [](size_t n) -> int64_t { return n == 0 ? 1 : static_cast<int64_t>(n); };
    int64_t count = 1;
    count *= dim(t_tc.size()) * dim(t_wt.size()) * dim(t_et.size());
    for (const FilterGrid* f : {&tc, &wt, &et})
        count *= dim(f->size_upper.size()) * dim(f->size_lower.size()) *
                 dim(f->prob_upper.size()) * dim(f->prob_mid.size());
    count *= dim(et_to_tc_min_voxels.size()) * dim(connectivity.size());
    return count;
}

std::array<double, 17> config_tuple(const PostprocessConfig& c) {
    return {
        c.thresholds.tc,
        c.thresholds.wt,
        c.thresholds.et,
        static_cast<double>(c.filter_tc.size_upper),
        static_cast<double>(c.filter_tc.size_lower),
        c.filter_tc.prob_upper,
        c.filter_tc.prob_mid,
        static_cast<double>(c.filter_wt.size_upper),
        static_cast<double>(c.filter_wt.size_lower),
        c.filter_wt.prob_upper,
        c.filter_wt.prob_mid,
        static_cast<double>(c.filter_et.size_upper),
        static_cast<double>(c.filter_et.size_lower),
        c.filter_et.prob_upper,
        c.filter_et.prob_mid,
        static_cast<double>(c.et_to_tc_min_voxels),
        static_cast<double>(c.connectivity),
    };
}

std::vector<PostprocessConfig> enumerate_candidates(const SearchGrid& grid,
                                                    const PostprocessConfig& base) {
    base.validate();
    const auto t_tc = or_default(grid.t_tc, base.thresholds.tc);
    const auto t_wt = or_default(grid.t_wt, base.thresholds.wt);
    const auto t_et = or_default(grid.t_et, base.thresholds.et);
    const auto expand_filter = [](const SearchGrid::FilterGrid& g, const FilterConfig& b) {
        struct Lists {
            std::vector<int64_t> su, sl;
            std::vector<double> pu, pm;
        } lists;
        lists.su = or_default(g.size_upper, b.size_upper);
        lists.sl = or_default(g.size_lower, b.size_lower);
        lists.pu = or_default(g.prob_upper, b.prob_upper);
        lists.pm = or_default(g.prob_mid, b.prob_mid);
        return lists;
    };
    const auto ftc = expand_filter(grid.tc, base.filter_tc);
    const auto fwt = expand_filter(grid.wt, base.filter_wt);
    const auto fet = expand_filter(grid.et, base.filter_et);
    const auto min_vox = or_default(grid.et_to_tc_min_voxels, base.et_to_tc_min_voxels);
    const auto conn = or_default(grid.connectivity, base.connectivity);

    std::vector<PostprocessConfig> out;
    out.reserve(static_cast<size_t>(grid.candidate_count()));
    for (double a : t_tc)
        for (double b : t_wt)
            for (double c : t_et)
                for (int64_t tsu : ftc.su)
                    for (int64_t tsl : ftc.sl)
                        for (double tpu : ftc.pu)
                            for (double tpm : ftc.pm)
                                for (int64_t wsu : fwt.su)
                                    for (int64_t wsl : fwt.sl)
                                        for (double wpu : fwt.pu)
                                            for (double wpm : fwt.pm)
                                                for (int64_t esu : fet.su)
                                                    for (int64_t esl : fet.sl)
                                                        for (double epu : fet.pu)
                                                            for (double epm : fet.pm)
                                                                for (int64_t mv : min_vox)
                                                                    for (int cn : conn) {
                                                                        PostprocessConfig cfg = base;
                                                                        cfg.thresholds = {a, b, c};
                                                                        cfg.filter_tc = {tsu, tsl, tpu, tpm};
                                                                        cfg.filter_wt = {wsu, wsl, wpu, wpm};
                                                                        cfg.filter_et = {esu, esl, epu, epm};
                                                                        cfg.et_to_tc_min_voxels = mv;
                                                                        cfg.connectivity = cn;
                                                                        cfg.validate();
                                                                        out.push_back(cfg);
                                                                    }
    return out;
}

double objective_score(const CorpusReport& report, TuneObjective objective) {
    switch (objective) {
        case TuneObjective::kLesionDice: return report.overall.lesion_dice;
        case TuneObjective::kLegacyDice: return report.overall.legacy_dice;
        case TuneObjective::kComposite:
            return 0.5 * (report.overall.lesion_dice + report.overall.legacy_dice);
    }
    throw std::logic_error("unreachable objective");
}

TuneResult tune(const std::vector<TuneCase>& cases, const SearchGrid& grid,
                const PostprocessConfig& base, const MetricsConfig& metrics_cfg,
                TuneObjective objective, int jobs) {
    if (cases.empty()) throw ValidationError("tune requires at least one case");
    if (jobs < 1) throw ValidationError("jobs must be at least 1, got " + std::to_string(jobs));
    metrics_cfg.validate();
    for (const TuneCase& tc : cases) {
        require_prob_map(tc.probs, "case " + tc.id + " probabilities");
        require_labelmap(tc.gt, "case " + tc.id + " reference labels");
        if (!(tc.probs.shape == tc.gt.shape))
            throw ValidationError("case " + tc.id + ": probability/reference shape mismatch");
    }

    const std::vector<PostprocessConfig> candidates = enumerate_candidates(grid, base);
    std::vector<double> scores(candidates.size(), 0.0);

    const auto score_one = [&](size_t ci) {
        std::vector<CaseReport> reports;
        reports.reserve(cases.size());
        for (const TuneCase& tc : cases) {
            const PostprocessResult post = postprocess_pipeline(tc.probs, candidates[ci]);
            CaseReport report = evaluate_case(post.labels, tc.gt, metrics_cfg);
            report.case_id = tc.id;
            reports.push_back(std::move(report));
        }
        scores[ci] = objective_score(aggregate_reports(std::move(reports)), objective);
    };

    const auto n_threads =
        std::min<size_t>(static_cast<size_t>(jobs), std::max<size_t>(candidates.size(), 1));
    if (n_threads <= 1) {
        for (size_t ci = 0; ci < candidates.size(); ++ci) score_one(ci);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const size_t ci = next.fetch_add(1);
                    if (ci >= candidates.size()) return;
                    score_one(ci);
                }
            });
        for (std::thread& th : pool) th.join();
    }

    TuneResult result;
    result.objective = objective;
    result.n_candidates = static_cast<int64_t>(candidates.size());
    result.n_cases = static_cast<int>(cases.size());
    result.leaderboard.reserve(candidates.size());
    for (size_t ci = 0; ci < candidates.size(); ++ci)
        result.leaderboard.push_back({candidates[ci], scores[ci]});
    std::sort(result.leaderboard.begin(), result.leaderboard.end(),
              [](const ScoredConfig& a, const ScoredConfig& b) {
                  if (a.score != b.score) return a.score > b.score;
                  return config_tuple(a.config) < config_tuple(b.config);
              });
    result.best = result.leaderboard.front();
    return result;
}

} // namespace segpipe
