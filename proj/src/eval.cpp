#include "vcg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vcg/errors.hpp"

namespace vcg {

TimeSplit time_split(const ImpressionLog& log, int holdout_days) {
    if (log.empty()) throw std::invalid_argument("cannot split an empty log");
    if (holdout_days < 0) throw std::invalid_argument("holdout_days must be >= 0");
    int64_t max_ts = log.front().ts;
    for (const Impression& im : log) max_ts = std::max(max_ts, im.ts);
    TimeSplit split;
    split.boundary_ts = max_ts - static_cast<int64_t>(holdout_days) * kDayMs;
    for (const Impression& im : log)
        (im.ts >= split.boundary_ts ? split.test : split.train).push_back(im);
    if (split.train.empty())
        throw std::invalid_argument("holdout of " + std::to_string(holdout_days) +
                                    " days covers the whole log");
    return split;
}

void LabeledFeed::validate() const {
    for (size_t i = 0; i < items.size(); ++i) {
        const LabeledItem& it = items[i];
        if (it.position != static_cast<int>(i) + 1)
            throw std::invalid_argument("feed positions must be contiguous from 1");
        if (it.label != 0 && it.label != 1)
            throw std::invalid_argument("labels must be 0 or 1");
        if (!(it.propensity > 0.0) || it.propensity > 1.0)
            throw std::invalid_argument("propensities must be in (0, 1]");
    }
}

double ndcg(const LabeledFeed& feed, bool use_ips, double propensity_cap) {
    feed.validate();
    if (use_ips && !(propensity_cap > 0.0))
        throw std::invalid_argument("propensity cap must be positive");
    size_t positives = 0;
    for (const LabeledItem& it : feed.items) positives += it.label;
    if (positives == 0 || positives == feed.items.size())
        throw std::invalid_argument("ndcg needs at least one positive and one negative");

    std::vector<double> gains;
    gains.reserve(feed.items.size());
    double gmax = 0.0;
    for (const LabeledItem& it : feed.items) {
        double g = it.label == 0
                       ? 0.0
                       : (use_ips ? std::min(1.0 / it.propensity, propensity_cap) : 1.0);
        gains.push_back(g);
        gmax = std::max(gmax, g);
    }
    // Scaling by the max gain makes equal positive weights cancel exactly.
    double dcg = 0.0;
    for (size_t i = 0; i < gains.size(); ++i)
        dcg += (gains[i] / gmax) / std::log2(static_cast<double>(i) + 2.0);
    std::sort(gains.begin(), gains.end(), std::greater<>());
    double idcg = 0.0;
    for (size_t i = 0; i < gains.size(); ++i)
        idcg += (gains[i] / gmax) / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

LabeledFeed reorder_by_score(const LabeledFeed& feed, const std::vector<double>& scores) {
    if (scores.size() != feed.items.size())
        throw std::invalid_argument("scores must align with feed items");
    std::vector<size_t> order(feed.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return feed.items[a].video_id < feed.items[b].video_id;
    });
    LabeledFeed out;
    out.feed_id = feed.feed_id;
    out.items.reserve(feed.items.size());
    for (size_t i = 0; i < order.size(); ++i) {
        LabeledItem it = feed.items[order[i]];
        it.position = static_cast<int>(i) + 1;
        out.items.push_back(it);
    }
    return out;
}

namespace {

void check_scored_labels(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels must have equal length");
    if (scores.empty()) throw std::invalid_argument("no scored examples");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
}

}  // namespace

ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold) {
    check_scored_labels(scores, labels);
    size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] >= threshold;
        if (predicted && labels[i] == 1) ++tp;
        else if (predicted) ++fp;
        else if (labels[i] == 1) ++fn;
        else ++tn;
    }
    ThresholdMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    return m;
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scored_labels(scores, labels);
    size_t n_pos = 0;
    for (int l : labels) n_pos += static_cast<size_t>(l);
    size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("AUC requires both label classes");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    // Average ranks across tied scores implement the ties-count-half rule.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

BinaryMetrics binary_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold) {
    ThresholdMetrics tm = threshold_metrics(scores, labels, threshold);
    BinaryMetrics m;
    m.accuracy = tm.accuracy;
    m.precision = tm.precision;
    m.recall = tm.recall;
    m.auc = auc_score(scores, labels);
    return m;
}

namespace {

bool in_window(const Impression& im, const TimeWindow& w) {
    return im.ts >= w.begin && im.ts < w.end;
}

void check_window(const TimeWindow& w) {
    if (w.begin > w.end) throw std::invalid_argument("window begin exceeds end");
}

}  // namespace

std::unordered_map<uint64_t, uint64_t> popularity_counts(const ImpressionLog& log,
                                                         const TimeWindow& window) {
    check_window(window);
    std::unordered_map<uint64_t, uint64_t> counts;
    for (const Impression& im : log)
        if (im.examined && in_window(im, window)) ++counts[im.video_id];
    return counts;
}

std::map<std::pair<uint64_t, uint64_t>, uint64_t> cooccurrence_counts(const ImpressionLog& log,
                                                                      const TimeWindow& window) {
    check_window(window);
    std::unordered_map<uint64_t, std::vector<uint64_t>> by_feed;
    for (const Impression& im : log)
        if (im.examined && in_window(im, window)) by_feed[im.feed_id].push_back(im.video_id);
    std::map<std::pair<uint64_t, uint64_t>, uint64_t> counts;
    for (auto& [feed_id, vids] : by_feed) {
        std::sort(vids.begin(), vids.end());
        vids.erase(std::unique(vids.begin(), vids.end()), vids.end());
        for (size_t a = 0; a < vids.size(); ++a)
            for (size_t b = a + 1; b < vids.size(); ++b) ++counts[{vids[a], vids[b]}];
    }
    return counts;
}

double visual_coherence(const std::vector<Embedding>& user_content_embs,
                        const std::vector<Embedding>& video_product_embs) {
    if (user_content_embs.empty() || video_product_embs.empty())
        throw std::invalid_argument("visual_coherence needs non-empty embedding lists");
    auto mean_of = [](const std::vector<Embedding>& embs) {
        Embedding acc(embs.front().size(), 0.0);
        for (const Embedding& e : embs) {
            if (e.size() != acc.size())
                throw std::invalid_argument("mixed embedding dimensions");
            for (size_t i = 0; i < e.size(); ++i) acc[i] += e[i];
        }
        for (double& v : acc) v /= static_cast<double>(embs.size());
        return acc;
    };
    return dot_score(mean_of(user_content_embs), mean_of(video_product_embs));
}

double fit_gamma(const ImpressionLog& log) {
    std::map<int, std::pair<uint64_t, uint64_t>> by_pos;  // position -> (examined, total)
    for (const Impression& im : log) {
        auto& [ex, total] = by_pos[im.position];
        ex += im.examined ? 1 : 0;
        ++total;
    }
    double num = 0.0, den = 0.0;
    size_t used = 0;
    for (const auto& [pos, counts] : by_pos) {
        if (pos < 2 || counts.first == 0) continue;
        double rate = static_cast<double>(counts.first) / static_cast<double>(counts.second);
        double lp = std::log(static_cast<double>(pos));
        num += lp * std::log(rate);
        den += lp * lp;
        ++used;
    }
    if (used == 0)
        throw std::invalid_argument("no usable positions (>= 2, nonzero rate) to fit gamma");
    return -num / den;
}

namespace {

std::optional<double> skew_or_absent(const std::vector<double>& xs) {
    if (xs.size() < 3) return std::nullopt;
    if (population_variance(xs) == 0.0) return std::nullopt;
    return skewness(xs);
}

}  // namespace

EvalReport evaluate_policy(const PolicyEvalInput& input, const VideoIndex& catalog,
                           const EmbeddingProvider& product_content,
                           const std::vector<UserHistory>& histories) {
    if (input.recommendations.empty())
        throw std::invalid_argument("policy produced no recommendations");
    if (input.test_scores.size() != input.test_feeds.size())
        throw std::invalid_argument("test_scores must align with test_feeds");
    if (!input.rec_watch_ms.empty() && input.rec_watch_ms.size() != input.recommendations.size())
        throw std::invalid_argument("rec_watch_ms must align with recommendations");
    if (input.exposure_k < 1 || input.coherence_k < 1)
        throw std::invalid_argument("metric prefixes must be >= 1");
    if (catalog.size() == 0) throw std::invalid_argument("empty catalog");

    EvalReport rep;
    rep.policy = input.policy_name;
    rep.split_ts = input.split_ts;
    rep.n_test_feeds = input.test_feeds.size();
    rep.n_users = input.recommendations.size();

    // Feed-wise ranking metrics over reordered eligible feeds; point-wise
    // metrics pool every test item.
    double ndcg_sum = 0.0, ips_sum = 0.0;
    size_t eligible = 0;
    std::vector<double> all_scores;
    std::vector<int> all_labels;
    for (size_t f = 0; f < input.test_feeds.size(); ++f) {
        const LabeledFeed& feed = input.test_feeds[f];
        feed.validate();
        const std::vector<double>& scores = input.test_scores[f];
        if (scores.size() != feed.items.size())
            throw std::invalid_argument("test_scores must align with feed items");
        size_t positives = 0;
        for (size_t i = 0; i < feed.items.size(); ++i) {
            positives += static_cast<size_t>(feed.items[i].label);
            all_scores.push_back(scores[i]);
            all_labels.push_back(feed.items[i].label);
        }
        if (positives == 0 || positives == feed.items.size()) continue;
        LabeledFeed reordered = reorder_by_score(feed, scores);
        ndcg_sum += ndcg(reordered, false, input.propensity_cap);
        ips_sum += ndcg(reordered, true, input.propensity_cap);
        ++eligible;
    }
    rep.n_eligible_feeds = eligible;
    rep.n_test_impressions = all_labels.size();
    if (eligible > 0) {
        rep.ndcg = ndcg_sum / static_cast<double>(eligible);
        rep.ndcg_ips = ips_sum / static_cast<double>(eligible);
    }
    if (!all_labels.empty()) {
        ThresholdMetrics tm = threshold_metrics(all_scores, all_labels, input.threshold);
        rep.accuracy = tm.accuracy;
        rep.precision = tm.precision;
        rep.recall = tm.recall;
        size_t positives = 0;
        for (int l : all_labels) positives += static_cast<size_t>(l);
        if (positives > 0 && positives < all_labels.size())
            rep.auc = auc_score(all_scores, all_labels);
    }

    // Exposure and duration metrics over the served prefix.
    std::unordered_map<uint64_t, size_t> catalog_slot;
    catalog_slot.reserve(catalog.size());
    for (size_t i = 0; i < catalog.records().size(); ++i)
        catalog_slot.emplace(catalog.records()[i].video_id, i);
    double catalog_duration_sum = 0.0;
    for (const VideoRecord& r : catalog.records()) catalog_duration_sum += r.duration_ms;
    rep.catalog_mean_duration_ms = catalog_duration_sum / static_cast<double>(catalog.size());

    std::vector<double> exposure(catalog.size(), 0.0);
    std::vector<double> durations;
    for (const RankedFeed& feed : input.recommendations) {
        size_t limit = std::min(input.exposure_k, feed.items.size());
        for (size_t i = 0; i < limit; ++i) {
            auto slot = catalog_slot.find(feed.items[i].video_id);
            if (slot == catalog_slot.end())
                throw DataError("recommended video " + std::to_string(feed.items[i].video_id) +
                                " is not in the catalog");
            exposure[slot->second] += 1.0;
            durations.push_back(
                static_cast<double>(catalog.records()[slot->second].duration_ms));
        }
        rep.n_recommended += feed.items.size();
    }
    if (!durations.empty()) rep.mean_recommended_duration_ms = mean(durations);
    rep.skew_popularity = skew_or_absent(exposure);
    rep.skew_duration = skew_or_absent(durations);

    // Watch-time skew over per-video totals, when simulated watch data came in.
    if (!input.rec_watch_ms.empty()) {
        std::vector<double> watch_totals(catalog.size(), 0.0);
        for (size_t f = 0; f < input.recommendations.size(); ++f) {
            const RankedFeed& feed = input.recommendations[f];
            const std::vector<uint32_t>& watch = input.rec_watch_ms[f];
            if (watch.size() != feed.items.size())
                throw std::invalid_argument("rec_watch_ms rows must align with feed items");
            for (size_t i = 0; i < watch.size(); ++i) {
                auto slot = catalog_slot.find(feed.items[i].video_id);
                if (slot == catalog_slot.end())
                    throw DataError("watched video " + std::to_string(feed.items[i].video_id) +
                                    " is not in the catalog");
                watch_totals[slot->second] += static_cast<double>(watch[i]);
            }
        }
        rep.skew_watch_time = skew_or_absent(watch_totals);
    }

    // Coherence: content alignment of each user's history with their top
    // coherence_k recommendations, averaged per user.
    std::unordered_map<uint64_t, const UserHistory*> history_of;
    history_of.reserve(histories.size());
    for (const UserHistory& h : histories) history_of.emplace(h.user_id, &h);
    std::vector<double> per_user;
    for (const RankedFeed& feed : input.recommendations) {
        auto hit = history_of.find(feed.user_id);
        if (hit == history_of.end()) continue;
        std::vector<Embedding> user_embs;
        for (const InteractionEvent& ev : hit->second->events)
            if (product_content.contains(ev.product_id))
                user_embs.push_back(product_content.get(ev.product_id));
        if (user_embs.empty()) continue;
        std::vector<double> values;
        size_t limit = std::min(input.coherence_k, feed.items.size());
        for (size_t i = 0; i < limit; ++i) {
            const VideoRecord& rec = catalog.get(feed.items[i].video_id);
            std::vector<Embedding> video_embs;
            for (uint64_t pid : rec.product_ids)
                if (product_content.contains(pid)) video_embs.push_back(product_content.get(pid));
            if (video_embs.empty()) continue;
            values.push_back(visual_coherence(user_embs, video_embs));
        }
        if (!values.empty()) per_user.push_back(mean(values));
    }
    rep.n_coherence_users = per_user.size();
    if (!per_user.empty()) {
        rep.coherence_mean = mean(per_user);
        rep.coherence_std = std::sqrt(population_variance(per_user));
    }
    return rep;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    if (v.has_value()) return *v;
    return nullptr;
}

std::optional<double> opt_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

}  // namespace

nlohmann::json eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["policy"] = report.policy;
    j["ndcg"] = opt_json(report.ndcg);
    j["ndcg_ips"] = opt_json(report.ndcg_ips);
    j["accuracy"] = report.accuracy;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["auc"] = opt_json(report.auc);
    j["skew_popularity"] = opt_json(report.skew_popularity);
    j["skew_watch_time"] = opt_json(report.skew_watch_time);
    j["skew_duration"] = opt_json(report.skew_duration);
    j["mean_recommended_duration_ms"] = report.mean_recommended_duration_ms;
    j["catalog_mean_duration_ms"] = report.catalog_mean_duration_ms;
    j["coherence_mean"] = report.coherence_mean;
    j["coherence_std"] = report.coherence_std;
    j["n_test_feeds"] = report.n_test_feeds;
    j["n_eligible_feeds"] = report.n_eligible_feeds;
    j["n_test_impressions"] = report.n_test_impressions;
    j["n_users"] = report.n_users;
    j["n_recommended"] = report.n_recommended;
    j["n_coherence_users"] = report.n_coherence_users;
    j["split_ts"] = report.split_ts;
    return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.policy = j.at("policy").get<std::string>();
        r.ndcg = opt_from_json(j, "ndcg");
        r.ndcg_ips = opt_from_json(j, "ndcg_ips");
        r.accuracy = j.at("accuracy").get<double>();
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.auc = opt_from_json(j, "auc");
        r.skew_popularity = opt_from_json(j, "skew_popularity");
        r.skew_watch_time = opt_from_json(j, "skew_watch_time");
        r.skew_duration = opt_from_json(j, "skew_duration");
        r.mean_recommended_duration_ms = j.at("mean_recommended_duration_ms").get<double>();
        r.catalog_mean_duration_ms = j.at("catalog_mean_duration_ms").get<double>();
        r.coherence_mean = j.at("coherence_mean").get<double>();
        r.coherence_std = j.at("coherence_std").get<double>();
        r.n_test_feeds = j.at("n_test_feeds").get<size_t>();
        r.n_eligible_feeds = j.at("n_eligible_feeds").get<size_t>();
        r.n_test_impressions = j.at("n_test_impressions").get<size_t>();
        r.n_users = j.at("n_users").get<size_t>();
        r.n_recommended = j.at("n_recommended").get<size_t>();
        r.n_coherence_users = j.at("n_coherence_users").get<size_t>();
        r.split_ts = j.at("split_ts").get<int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad evaluation report: ") + e.what());
    }
    return r;
}

std::string eval_comparison_table(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("no reports to tabulate");
    auto fmt = [](double v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << v;
        return os.str();
    };
    auto fmt_opt = [&](const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); };

    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    auto add_row = [&](const std::string& name, auto getter) {
        std::vector<std::string> cells;
        for (const EvalReport& r : reports) cells.push_back(getter(r));
        rows.emplace_back(name, std::move(cells));
    };
    add_row("ndcg", [&](const EvalReport& r) { return fmt_opt(r.ndcg); });
    add_row("ndcg_ips", [&](const EvalReport& r) { return fmt_opt(r.ndcg_ips); });
    add_row("accuracy", [&](const EvalReport& r) { return fmt(r.accuracy); });
    add_row("precision", [&](const EvalReport& r) { return fmt(r.precision); });
    add_row("recall", [&](const EvalReport& r) { return fmt(r.recall); });
    add_row("auc", [&](const EvalReport& r) { return fmt_opt(r.auc); });
    add_row("skew_popularity", [&](const EvalReport& r) { return fmt_opt(r.skew_popularity); });
    add_row("skew_watch_time", [&](const EvalReport& r) { return fmt_opt(r.skew_watch_time); });
    add_row("skew_duration", [&](const EvalReport& r) { return fmt_opt(r.skew_duration); });
    add_row("mean_rec_duration_ms",
            [&](const EvalReport& r) { return fmt(r.mean_recommended_duration_ms); });
    add_row("catalog_mean_duration_ms",
            [&](const EvalReport& r) { return fmt(r.catalog_mean_duration_ms); });
    add_row("coherence_mean", [&](const EvalReport& r) { return fmt(r.coherence_mean); });
    add_row("coherence_std", [&](const EvalReport& r) { return fmt(r.coherence_std); });
    add_row("eligible_feeds", [&](const EvalReport& r) {
        return std::to_string(r.n_eligible_feeds) + "/" + std::to_string(r.n_test_feeds);
    });

    size_t name_width = std::string("metric").size();
    for (const auto& [name, cells] : rows) name_width = std::max(name_width, name.size());
    std::vector<size_t> col_width(reports.size());
    for (size_t c = 0; c < reports.size(); ++c) {
        col_width[c] = reports[c].policy.size();
        for (const auto& [name, cells] : rows) col_width[c] = std::max(col_width[c], cells[c].size());
    }

    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(name_width)) << "metric";
    for (size_t c = 0; c < reports.size(); ++c)
        os << "  " << std::right << std::setw(static_cast<int>(col_width[c])) << reports[c].policy;
    os << "\n";
    for (const auto& [name, cells] : rows) {
        os << std::left << std::setw(static_cast<int>(name_width)) << name;
        for (size_t c = 0; c < reports.size(); ++c)
            os << "  " << std::right << std::setw(static_cast<int>(col_width[c])) << cells[c];
        os << "\n";
    }
    return os.str();
}

}  // namespace vcg
