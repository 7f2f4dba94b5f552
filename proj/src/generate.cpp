#include "dxr/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string>

#include "dxr/random.hpp"

namespace dxr {

namespace {

std::string padded(char prefix, std::size_t i, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
    return buf;
}

int digits(std::size_t n) {
    int w = 3;
    for (std::size_t cap = 1000; n > cap; cap *= 10) ++w;
    return w;
}

void check_range(const Range& r, double lo, double hi, bool lo_open, bool hi_open, const char* what) {
    const bool lo_ok = lo_open ? r.lo > lo : r.lo >= lo;
    const bool hi_ok = hi_open ? r.hi < hi : r.hi <= hi;
    if (!(lo_ok && hi_ok && r.lo <= r.hi)) throw InvalidArgument(std::string("generator: ") + what + " range outside its legal domain");
}

// k distinct values from [0, n), in draw order.
std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(n - i)]);
    pool.resize(k);
    return pool;
}

SubvalueNode two_parent_node(std::string id, std::vector<std::string> diseases, std::vector<std::string> treatments,
                             double v01, double v10, double v11) {
    SubvalueNode s{std::move(id), std::move(diseases), std::move(treatments), {}};
    s.table = {{"00", 1.0}, {"01", v01}, {"10", v10}, {"11", v11}};
    return s;
}

}  // namespace

KnowledgeBase generate_kb(const GeneratorSpec& spec) {
    check_range(spec.prior, 0.0, 1.0, true, true, "prior");
    check_range(spec.strength, 0.0, 1.0, true, false, "strength");
    check_range(spec.leak, 0.0, 1.0, false, true, "leak");
    check_range(spec.side_effect, 0.0, 1.0, true, false, "side_effect");
    check_range(spec.untreated, 0.0, 1.0, true, false, "untreated");
    check_range(spec.cure, 0.0, 1.0, false, false, "cure");
    check_range(spec.interaction_penalty, 0.0, 1.0, true, false, "interaction_penalty");
    check_range(spec.harm_penalty, 0.0, 1.0, true, false, "harm_penalty");
    if (spec.n_diseases == 0) throw InvalidArgument("generator: at least one disease is required");
    if (spec.n_manifestations > 0 && spec.links_per_manifestation > spec.n_diseases) {
        throw InvalidArgument("generator: links_per_manifestation exceeds n_diseases");
    }
    if (spec.exclusive_treatments && spec.n_treatments > spec.n_diseases) {
        throw InvalidArgument("generator: exclusive treatments need n_treatments <= n_diseases");
    }

    Rng rng(spec.seed);
    KnowledgeBase kb;
    const int dw = digits(spec.n_diseases);
    const int mw = digits(spec.n_manifestations);
    const int tw = digits(spec.n_treatments);
    auto did = [&](std::size_t i) { return padded('d', i, dw); };
    auto tid = [&](std::size_t i) { return padded('t', i, tw); };

    for (std::size_t i = 0; i < spec.n_diseases; ++i) {
        kb.diseases.push_back({did(i), "disease " + std::to_string(i), rng.uniform(spec.prior.lo, spec.prior.hi)});
    }
    for (std::size_t i = 0; i < spec.n_manifestations; ++i) {
        Manifestation m{padded('m', i, mw), "manifestation " + std::to_string(i), rng.uniform(spec.leak.lo, spec.leak.hi), {}};
        auto parents = sample_distinct(rng, spec.n_diseases, spec.links_per_manifestation);
        std::sort(parents.begin(), parents.end());
        for (std::size_t d : parents) {
            // uniform() is half-open, so a strength range with lo > 0 stays positive.
            double s = rng.uniform(spec.strength.lo, spec.strength.hi);
            if (s <= 0.0) s = spec.strength.hi;
            m.links.push_back({did(d), s});
        }
        kb.manifestations.push_back(std::move(m));
    }

    std::vector<std::size_t> exclusive_order;
    if (spec.exclusive_treatments) exclusive_order = sample_distinct(rng, spec.n_diseases, spec.n_treatments);

    for (std::size_t i = 0; i < spec.n_treatments; ++i) {
        Treatment t{tid(i), "treatment " + std::to_string(i), {}};
        std::vector<std::size_t> treated;
        if (spec.exclusive_treatments) {
            treated = {exclusive_order[i]};
        } else {
            const bool two = spec.n_diseases >= 2 && rng.bernoulli(spec.two_disease_prob);
            treated = sample_distinct(rng, spec.n_diseases, two ? 2 : 1);
            std::sort(treated.begin(), treated.end());
        }
        for (std::size_t d : treated) {
            t.treats.push_back(did(d));
            const double s = rng.uniform(spec.side_effect.lo, spec.side_effect.hi);
            const double u = rng.uniform(spec.untreated.lo, spec.untreated.hi);
            const double c = rng.uniform(spec.cure.lo, spec.cure.hi);
            kb.subvalues.push_back(two_parent_node("u_" + tid(i) + "_" + did(d), {did(d)}, {tid(i)}, s, u, u + c * (s - u)));
        }

        if (!spec.exclusive_treatments && spec.n_diseases > treated.size() && rng.bernoulli(spec.harm_prob)) {
            std::size_t d;
            do {
                d = rng.index(spec.n_diseases);
            } while (std::find(treated.begin(), treated.end(), d) != treated.end());
            const double h = rng.uniform(spec.harm_penalty.lo, spec.harm_penalty.hi);
            kb.subvalues.push_back(two_parent_node("h_" + tid(i) + "_" + did(d), {did(d)}, {tid(i)}, 1.0, 1.0, h));
        }
        kb.treatments.push_back(std::move(t));
    }

    if (!spec.exclusive_treatments) {
        for (std::size_t i = 0; i < spec.n_treatments; ++i) {
            for (std::size_t k = i + 1; k < spec.n_treatments; ++k) {
                if (!rng.bernoulli(spec.interaction_prob)) continue;
                const double p = rng.uniform(spec.interaction_penalty.lo, spec.interaction_penalty.hi);
                kb.subvalues.push_back(two_parent_node("x_" + tid(i) + "_" + tid(k), {}, {tid(i), tid(k)}, 1.0, 1.0, p));
            }
        }
    }
    return canonicalize(std::move(kb));
}

Findings random_findings(const KnowledgeBase& kb, const FindingsDensity& density, std::uint64_t seed) {
    const double total = density.present + density.absent + density.unobserved;
    if (!(density.present >= 0 && density.absent >= 0 && density.unobserved >= 0 && total > 0)) {
        throw InvalidArgument("findings density weights must be non-negative with a positive sum");
    }
    Rng rng(seed);
    Findings f;
    for (const auto& m : kb.manifestations) {
        const double r = rng.uniform() * total;
        if (r < density.present) {
            f.present.insert(m.id);
        } else if (r < density.present + density.absent) {
            f.absent.insert(m.id);
        }
    }
    return f;
}

}  // namespace dxr
