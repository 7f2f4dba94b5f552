#include "dxr/kb.hpp"

#include <algorithm>
#include <sstream>

#include "dxr/kb_io.hpp"

namespace dxr {

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error([&] {
          std::ostringstream os;
          os << violations.size() << " violation(s)";
          for (const auto& v : violations) os << "; " << v.node << ": " << v.rule << " (" << v.detail << ")";
          return os.str();
      }()),
      violations_(std::move(violations)) {}

Findings Findings::make(std::set<std::string> present, std::set<std::string> absent) {
    for (const auto& id : present) {
        if (absent.count(id)) throw InvalidArgument("finding '" + id + "' listed as both present and absent");
    }
    return Findings{std::move(present), std::move(absent)};
}

bool is_valid_identifier(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
    });
}

std::string bitstring(std::uint64_t bits, std::size_t width) {
    std::string s(width, '0');
    for (std::size_t k = 0; k < width; ++k) {
        if ((bits >> k) & 1U) s[k] = '1';
    }
    return s;
}

namespace {

// Subvalue tables wider than this cannot be enumerated.
constexpr std::size_t kMaxSubvalueParents = 20;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<Violation> validate_kb(const KnowledgeBase& kb) {
    std::vector<Violation> out;
    auto bad = [&](const std::string& node, std::string rule, std::string detail) {
        out.push_back({node, std::move(rule), std::move(detail)});
    };

    if (kb.version != 1) bad("kb", "version", "unsupported version " + std::to_string(kb.version));
    if (kb.diseases.empty()) bad("kb", "nonempty-diseases", "at least one disease is required");

    std::set<std::string> seen;
    std::set<std::string> diseases, manifestations, treatments, subvalue_ids;
    auto claim = [&](const std::string& id, std::set<std::string>& kind) {
        if (!is_valid_identifier(id)) bad(id, "identifier", "ids must match [A-Za-z0-9_]+");
        if (!seen.insert(id).second) bad(id, "unique-id", "duplicate id '" + id + "'");
        kind.insert(id);
    };

    for (const auto& d : kb.diseases) {
        claim(d.id, diseases);
        if (!(d.prior > 0.0 && d.prior < 1.0)) bad(d.id, "prior-range", "prior " + fmt(d.prior) + " not in (0,1)");
    }
    for (const auto& m : kb.manifestations) {
        claim(m.id, manifestations);
        if (!(m.leak >= 0.0 && m.leak < 1.0)) bad(m.id, "leak-range", "leak " + fmt(m.leak) + " not in [0,1)");
        std::set<std::string> linked;
        for (const auto& l : m.links) {
            if (!diseases.count(l.disease)) bad(m.id, "link-target", "unknown disease '" + l.disease + "'");
            if (!linked.insert(l.disease).second) bad(m.id, "duplicate-link", "disease '" + l.disease + "' linked twice");
            if (!(l.strength > 0.0 && l.strength <= 1.0)) {
                bad(m.id, "strength-range", "strength " + fmt(l.strength) + " for '" + l.disease + "' not in (0,1]");
            }
        }
    }
    for (const auto& t : kb.treatments) {
        claim(t.id, treatments);
        if (t.treats.empty()) bad(t.id, "nonempty-treats", "treatment treats no disease");
        std::set<std::string> treated;
        for (const auto& d : t.treats) {
            if (!diseases.count(d)) bad(t.id, "treats-target", "unknown disease '" + d + "'");
            if (!treated.insert(d).second) bad(t.id, "duplicate-treats", "disease '" + d + "' listed twice");
        }
    }

    std::set<std::pair<std::string, std::string>> cooccurring;
    for (const auto& s : kb.subvalues) {
        claim(s.id, subvalue_ids);
        const std::size_t width = s.n_parents();
        if (width == 0) bad(s.id, "nonempty-parents", "subvalue node has no parents");
        std::set<std::string> parents;
        for (const auto& d : s.disease_parents) {
            if (!diseases.count(d)) bad(s.id, "parent-target", "unknown disease parent '" + d + "'");
            if (!parents.insert(d).second) bad(s.id, "duplicate-parent", "parent '" + d + "' listed twice");
        }
        for (const auto& t : s.treatment_parents) {
            if (!treatments.count(t)) bad(s.id, "parent-target", "unknown treatment parent '" + t + "'");
            if (!parents.insert(t).second) bad(s.id, "duplicate-parent", "parent '" + t + "' listed twice");
        }
        for (const auto& d : s.disease_parents) {
            for (const auto& t : s.treatment_parents) cooccurring.insert({t, d});
        }

        if (width > kMaxSubvalueParents) {
            bad(s.id, "table-width", std::to_string(width) + " parents exceeds limit");
            continue;
        }
        const std::uint64_t n_keys = std::uint64_t{1} << width;
        for (std::uint64_t k = 0; k < n_keys; ++k) {
            const std::string key = bitstring(k, width);
            if (!s.table.count(key)) bad(s.id, "table-complete", "missing key '" + key + "'");
        }
        for (const auto& [key, value] : s.table) {
            const bool well_formed = key.size() == width &&
                                     std::all_of(key.begin(), key.end(), [](char c) { return c == '0' || c == '1'; });
            if (!well_formed) {
                bad(s.id, "table-key", "unexpected key '" + key + "'");
                continue;
            }
            if (!(value > 0.0 && value <= 1.0)) {
                bad(s.id, "utility-range", "entry '" + key + "' = " + fmt(value) + " not in (0,1]");
            }
        }
        if (width > 0) {
            auto it = s.table.find(std::string(width, '0'));
            if (it != s.table.end() && it->second != 1.0) {
                bad(s.id, "normalized", "all-false entry must be 1, got " + fmt(it->second));
            }
        }
    }

    for (const auto& t : kb.treatments) {
        for (const auto& d : t.treats) {
            if (diseases.count(d) && !cooccurring.count({t.id, d})) {
                bad(t.id, "treating-pair-cooccurs", "no subvalue node has both '" + t.id + "' and '" + d + "' as parents");
            }
        }
    }
    return out;
}

std::vector<Violation> validate_findings(const KnowledgeBase& kb, const Findings& findings) {
    std::vector<Violation> out;
    std::set<std::string> ids;
    for (const auto& m : kb.manifestations) ids.insert(m.id);
    for (const auto& id : findings.present) {
        if (!ids.count(id)) out.push_back({id, "finding-target", "unknown manifestation"});
        if (findings.absent.count(id)) out.push_back({id, "finding-conflict", "both present and absent"});
    }
    for (const auto& id : findings.absent) {
        if (!ids.count(id)) out.push_back({id, "finding-target", "unknown manifestation"});
    }
    return out;
}

KbStats kb_stats(const KnowledgeBase& kb) {
    KbStats s;
    s.n_diseases = kb.diseases.size();
    s.n_manifestations = kb.manifestations.size();
    s.n_treatments = kb.treatments.size();
    s.n_subvalues = kb.subvalues.size();
    for (const auto& m : kb.manifestations) s.n_arcs += m.links.size();
    return s;
}

KnowledgeBase canonicalize(KnowledgeBase kb) {
    auto by_id = [](const auto& a, const auto& b) { return a.id < b.id; };
    std::sort(kb.diseases.begin(), kb.diseases.end(), by_id);
    std::sort(kb.manifestations.begin(), kb.manifestations.end(), by_id);
    std::sort(kb.treatments.begin(), kb.treatments.end(), by_id);
    std::sort(kb.subvalues.begin(), kb.subvalues.end(), by_id);
    for (auto& m : kb.manifestations) {
        std::sort(m.links.begin(), m.links.end(), [](const Link& a, const Link& b) { return a.disease < b.disease; });
    }
    for (auto& t : kb.treatments) std::sort(t.treats.begin(), t.treats.end());
    return kb;
}

Model::Model(KnowledgeBase kb) : kb_(std::move(kb)) {
    if (auto v = validate_kb(kb_); !v.empty()) throw ValidationError(std::move(v));
    hash_ = kb_hash(kb_);

    for (std::size_t i = 0; i < kb_.diseases.size(); ++i) {
        disease_ix_.emplace(kb_.diseases[i].id, i);
        prior_.push_back(kb_.diseases[i].prior);
    }
    for (std::size_t i = 0; i < kb_.manifestations.size(); ++i) {
        const auto& m = kb_.manifestations[i];
        manifestation_ix_.emplace(m.id, i);
        CManifestation cm{m.leak, {}};
        for (const auto& l : m.links) cm.links.push_back({disease_ix_.at(l.disease), l.strength});
        manifestations_.push_back(std::move(cm));
    }
    for (std::size_t i = 0; i < kb_.treatments.size(); ++i) {
        treatment_ix_.emplace(kb_.treatments[i].id, i);
        CTreatment ct;
        for (const auto& d : kb_.treatments[i].treats) {
            ct.treats.push_back(disease_ix_.at(d));
            pairs_.push_back({i, disease_ix_.at(d)});
        }
        treatments_.push_back(std::move(ct));
    }
    for (std::size_t i = 0; i < kb_.subvalues.size(); ++i) {
        const auto& s = kb_.subvalues[i];
        CSubvalue cs;
        for (const auto& d : s.disease_parents) cs.diseases.push_back(disease_ix_.at(d));
        for (const auto& t : s.treatment_parents) {
            const std::size_t ti = treatment_ix_.at(t);
            cs.treatments.push_back(ti);
            treatments_[ti].subvalues.push_back(i);
        }
        const std::size_t width = s.n_parents();
        cs.table.resize(std::size_t{1} << width);
        for (std::size_t k = 0; k < cs.table.size(); ++k) cs.table[k] = s.table.at(bitstring(k, width));
        subvalues_.push_back(std::move(cs));
    }
}

std::optional<std::size_t> Model::disease_index(std::string_view id) const {
    auto it = disease_ix_.find(std::string(id));
    if (it == disease_ix_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Model::manifestation_index(std::string_view id) const {
    auto it = manifestation_ix_.find(std::string(id));
    if (it == manifestation_ix_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> Model::treatment_index(std::string_view id) const {
    auto it = treatment_ix_.find(std::string(id));
    if (it == treatment_ix_.end()) return std::nullopt;
    return it->second;
}

Evidence Model::resolve(const Findings& findings) const {
    if (auto v = validate_findings(kb_, findings); !v.empty()) throw ValidationError(std::move(v));
    Evidence ev;
    for (const auto& id : findings.present) ev.present.push_back(manifestation_ix_.at(id));
    for (const auto& id : findings.absent) ev.absent.push_back(manifestation_ix_.at(id));
    std::sort(ev.present.begin(), ev.present.end());
    std::sort(ev.absent.begin(), ev.absent.end());
    return ev;
}

}  // namespace dxr
