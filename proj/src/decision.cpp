#include "dxr/decision.hpp"

#include <algorithm>
#include <set>

namespace dxr {

std::map<std::string, bool> named_assignment(const Model& model, const Assignment& a) {
    std::map<std::string, bool> out;
    for (std::size_t i = 0; i < model.n_treatments(); ++i) out[model.treatment_id(i)] = a.at(i) != 0;
    return out;
}

Assignment assignment_from_names(const Model& model, const std::map<std::string, bool>& named) {
    Assignment a(model.n_treatments(), 0);
    for (const auto& [id, on] : named) {
        auto i = model.treatment_index(id);
        if (!i) throw InvalidArgument("unknown treatment '" + id + "'");
        a[*i] = on ? 1 : 0;
    }
    if (named.size() != model.n_treatments()) throw InvalidArgument("assignment must cover every treatment");
    return a;
}

double utility_of_state(const Model& model, std::span<const std::uint8_t> diseases, std::span<const std::uint8_t> treatments) {
    if (diseases.size() != model.n_diseases() || treatments.size() != model.n_treatments()) {
        throw InvalidArgument("utility_of_state: state must cover every disease and treatment");
    }
    double u = 1.0;
    for (std::size_t k = 0; k < model.n_subvalues(); ++k) {
        const auto& sv = model.subvalue(k);
        std::size_t key = 0, bit = 0;
        for (std::size_t d : sv.diseases) key |= std::size_t{diseases[d] != 0} << bit++;
        for (std::size_t t : sv.treatments) key |= std::size_t{treatments[t] != 0} << bit++;
        u *= sv.table[key];
    }
    return u;
}

UtilityEvaluator::UtilityEvaluator(const Model& model, std::vector<std::size_t> subvalues, const JointEngine& engine) {
    std::set<std::size_t> ds;
    for (std::size_t k : subvalues) {
        for (std::size_t d : model.subvalue(k).diseases) ds.insert(d);
    }
    diseases_.assign(ds.begin(), ds.end());
    if (diseases_.size() > engine.cap()) {
        throw CapExceededError("expected utility needs a joint over " + std::to_string(diseases_.size()) +
                               " diseases, cap is " + std::to_string(engine.cap()));
    }
    for (std::size_t k : subvalues) {
        Node node{&model.subvalue(k), {}};
        for (std::size_t d : node.sv->diseases) {
            node.positions.push_back(static_cast<std::size_t>(std::lower_bound(diseases_.begin(), diseases_.end(), d) -
                                                              diseases_.begin()));
        }
        nodes_.push_back(std::move(node));
    }
    joint_ = engine.joint(diseases_);
}

double UtilityEvaluator::operator()(const Assignment& a) const {
    // Treatment bits are fixed by the assignment; only disease bits vary.
    std::vector<std::size_t> treatment_key(nodes_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
        const auto& sv = *nodes_[n].sv;
        std::size_t key = 0, bit = sv.diseases.size();
        for (std::size_t t : sv.treatments) key |= std::size_t{a.at(t) != 0} << bit++;
        treatment_key[n] = key;
    }
    double eu = 0.0;
    for (std::size_t state = 0; state < joint_.size(); ++state) {
        if (joint_[state] == 0.0) continue;
        double u = 1.0;
        for (std::size_t n = 0; n < nodes_.size(); ++n) {
            std::size_t key = treatment_key[n];
            const auto& pos = nodes_[n].positions;
            for (std::size_t b = 0; b < pos.size(); ++b) key |= ((state >> pos[b]) & 1U) << b;
            u *= nodes_[n].sv->table[key];
        }
        eu += joint_[state] * u;
    }
    return eu;
}

namespace {

std::vector<std::size_t> all_subvalues(const Model& model) {
    std::vector<std::size_t> out(model.n_subvalues());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = k;
    return out;
}

}  // namespace

double expected_utility(const Model& model, const Assignment& a, const JointEngine& engine) {
    if (a.size() != model.n_treatments()) throw InvalidArgument("assignment must cover every treatment");
    return UtilityEvaluator(model, all_subvalues(model), engine)(a);
}

double expected_utility(const Model& model, const Findings& findings, const Assignment& a, const DecisionOptions& opts) {
    return expected_utility(model, a, QuickscoreJoint(model, findings, opts.inference));
}

Maximum maximize(std::size_t k, const std::function<double(std::uint64_t)>& eu,
                 const std::function<const std::string&(std::size_t)>& id_of, double tie_tolerance) {
    Maximum out;
    const std::uint64_t count = std::uint64_t{1} << k;
    out.eus.resize(count);
    double best = -1.0;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        out.eus[mask] = eu(mask);
        best = std::max(best, out.eus[mask]);
    }

    auto true_ids = [&](std::uint64_t mask) {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < k; ++i) {
            if ((mask >> i) & 1U) ids.push_back(id_of(i));
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    bool have = false;
    std::vector<std::string> chosen_ids;
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        if (out.eus[mask] < best - tie_tolerance) continue;
        auto ids = true_ids(mask);
        if (!have || ids.size() < chosen_ids.size() || (ids.size() == chosen_ids.size() && ids < chosen_ids)) {
            have = true;
            out.mask = mask;
            chosen_ids = std::move(ids);
        }
    }
    out.eu = out.eus[out.mask];
    return out;
}

ComprehensiveSolution solve_comprehensive(const Model& model, const JointEngine& engine, const DecisionOptions& opts) {
    const std::size_t t = model.n_treatments();
    if (t > opts.brute_force_cap || t >= 63) {
        throw CapExceededError("comprehensive solve over " + std::to_string(t) + " treatments exceeds cap " +
                               std::to_string(opts.brute_force_cap));
    }
    const UtilityEvaluator evaluate(model, all_subvalues(model), engine);
    Assignment a(t, 0);
    auto eu = [&](std::uint64_t mask) {
        for (std::size_t i = 0; i < t; ++i) a[i] = (mask >> i) & 1U;
        return evaluate(a);
    };
    auto id_of = [&](std::size_t i) -> const std::string& { return model.treatment_id(i); };
    Maximum m = maximize(t, eu, id_of, opts.tie_tolerance);

    ComprehensiveSolution sol;
    sol.best.resize(t);
    for (std::size_t i = 0; i < t; ++i) sol.best[i] = (m.mask >> i) & 1U;
    sol.eu = m.eu;
    sol.op_count = m.eus.size();
    sol.eu_by_assignment = std::move(m.eus);
    return sol;
}

ComprehensiveSolution solve_comprehensive(const Model& model, const Findings& findings, const DecisionOptions& opts) {
    return solve_comprehensive(model, QuickscoreJoint(model, findings, opts.inference), opts);
}

PairUtilities pair_utilities(const Model& model, std::size_t treatment, std::size_t disease) {
    std::vector<std::uint8_t> d(model.n_diseases(), 0), a(model.n_treatments(), 0);
    PairUtilities u;
    u.u00 = utility_of_state(model, d, a);
    a[treatment] = 1;
    u.u01 = utility_of_state(model, d, a);
    d[disease] = 1;
    u.u11 = utility_of_state(model, d, a);
    a[treatment] = 0;
    u.u10 = utility_of_state(model, d, a);
    return u;
}

std::optional<double> threshold_from_utilities(const PairUtilities& u) {
    // Treating minus not treating is affine in p: g(p) = (1-p)(u01-u00) + p(u11-u10).
    const double g0 = u.u01 - u.u00;
    const double g1 = u.u11 - u.u10;
    if (g0 > 0.0) return 0.0;
    if (g1 > 0.0) return std::clamp(-g0 / (g1 - g0), 0.0, 1.0);
    return std::nullopt;
}

std::optional<double> compute_threshold(const Model& model, std::string_view treatment, std::string_view disease) {
    auto t = model.treatment_index(treatment);
    auto d = model.disease_index(disease);
    if (!t || !d) throw InvalidArgument("compute_threshold: unknown treatment or disease");
    const auto& treats = model.treatment(*t).treats;
    if (std::find(treats.begin(), treats.end(), *d) == treats.end()) {
        throw InvalidArgument("compute_threshold: '" + std::string(treatment) + "' does not treat '" + std::string(disease) + "'");
    }
    return threshold_from_utilities(pair_utilities(model, *t, *d));
}

std::optional<double> ThresholdTable::at(const std::string& treatment, const std::string& disease) const {
    auto it = entries.find({treatment, disease});
    if (it == entries.end()) throw InvalidArgument("threshold table has no entry for " + treatment + ":" + disease);
    return it->second;
}

ThresholdTable threshold_table(const Model& model) {
    const auto& pairs = model.treating_pairs();
    std::vector<std::optional<double>> values(pairs.size());
#pragma omp parallel for schedule(dynamic) if (pairs.size() > 64)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
        values[i] = threshold_from_utilities(pair_utilities(model, pairs[i].treatment, pairs[i].disease));
    }
    ThresholdTable table{model.hash(), {}};
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        table.entries[{model.treatment_id(pairs[i].treatment), model.disease_id(pairs[i].disease)}] = values[i];
    }
    return table;
}

json thresholds_to_json(const ThresholdTable& t) {
    json entries = json::object();
    for (const auto& [key, value] : t.entries) {
        entries[key.first + ":" + key.second] = value ? json(*value) : json(nullptr);
    }
    return {{"kb_hash", t.kb_hash}, {"thresholds", entries}};
}

ThresholdTable thresholds_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kb_hash") || !j.contains("thresholds")) {
        throw ParseError("threshold table: expected object with kb_hash and thresholds");
    }
    ThresholdTable t;
    t.kb_hash = j.at("kb_hash").get<std::string>();
    for (const auto& [key, value] : j.at("thresholds").items()) {
        const auto colon = key.find(':');
        if (colon == std::string::npos) throw ParseError("threshold table: key '" + key + "' is not treatment:disease");
        std::optional<double> v;
        if (!value.is_null()) {
            if (!value.is_number()) throw ParseError("threshold table: " + key + ": expected number or null");
            v = value.get<double>();
        }
        t.entries[{key.substr(0, colon), key.substr(colon + 1)}] = v;
    }
    return t;
}

}  // namespace dxr
