#pragma once
// Knowledge base: a two-layer noisy-OR belief network (diseases over
// manifestations) extended with binary treatment decisions and
// multiplicative subvalue (utility) nodes.
//
// KnowledgeBase is the string-keyed interchange form that mirrors the file
// format. Model is the validated, index-resolved form every solver runs on.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dxr/error.hpp"

namespace dxr {

struct Disease {
    std::string id;
    std::string name;
    double prior = 0.0;

    bool operator==(const Disease&) const = default;
};

struct Link {
    std::string disease;
    double strength = 0.0;

    bool operator==(const Link&) const = default;
};

struct Manifestation {
    std::string id;
    std::string name;
    double leak = 0.0;
    std::vector<Link> links;

    bool operator==(const Manifestation&) const = default;
};

struct Treatment {
    std::string id;
    std::string name;
    std::vector<std::string> treats;

    bool operator==(const Treatment&) const = default;
};

// Table keys are bitstrings over the parents, disease parents first and then
// treatment parents, each in declared order. '1' means the parent is true.
struct SubvalueNode {
    std::string id;
    std::vector<std::string> disease_parents;
    std::vector<std::string> treatment_parents;
    std::map<std::string, double> table;

    std::size_t n_parents() const { return disease_parents.size() + treatment_parents.size(); }
    bool operator==(const SubvalueNode&) const = default;
};

struct KnowledgeBase {
    int version = 1;
    std::vector<Disease> diseases;
    std::vector<Manifestation> manifestations;
    std::vector<Treatment> treatments;
    std::vector<SubvalueNode> subvalues;

    bool operator==(const KnowledgeBase&) const = default;
};

/// Observed evidence for one case. Manifestations in neither set are
/// unobserved.
struct Findings {
    std::set<std::string> present;
    std::set<std::string> absent;

    /// Throws InvalidArgument when an id is listed as both present and absent.
    static Findings make(std::set<std::string> present, std::set<std::string> absent);

    bool empty() const { return present.empty() && absent.empty(); }
    bool operator==(const Findings&) const = default;
};

struct KbStats {
    std::size_t n_diseases = 0;
    std::size_t n_manifestations = 0;
    std::size_t n_arcs = 0;
    std::size_t n_treatments = 0;
    std::size_t n_subvalues = 0;

    bool operator==(const KbStats&) const = default;
};

std::vector<Violation> validate_kb(const KnowledgeBase& kb);
std::vector<Violation> validate_findings(const KnowledgeBase& kb, const Findings& findings);
KbStats kb_stats(const KnowledgeBase& kb);

// Sorted ids everywhere order carries no meaning. Subvalue parent order is
// semantic (it fixes the table key layout) and is left alone.
KnowledgeBase canonicalize(KnowledgeBase kb);

bool is_valid_identifier(std::string_view id);
std::string bitstring(std::uint64_t bits, std::size_t width);

/// Findings resolved to manifestation indices (sorted, disjoint).
struct Evidence {
    std::vector<std::size_t> present;
    std::vector<std::size_t> absent;
};

class Model {
public:
    struct CLink {
        std::size_t disease;
        double strength;
    };
    struct CManifestation {
        double leak;
        std::vector<CLink> links;
    };
    struct CTreatment {
        std::vector<std::size_t> treats;
        std::vector<std::size_t> subvalues;  // subvalue nodes with this treatment as a parent
    };
    // Table index: bit k is parent k, disease parents occupying the low bits.
    struct CSubvalue {
        std::vector<std::size_t> diseases;
        std::vector<std::size_t> treatments;
        std::vector<double> table;
    };
    struct TreatingPair {
        std::size_t treatment;
        std::size_t disease;
    };

    /// Throws ValidationError listing every violated invariant.
    explicit Model(KnowledgeBase kb);

    const KnowledgeBase& kb() const { return kb_; }
    const std::string& hash() const { return hash_; }

    std::size_t n_diseases() const { return prior_.size(); }
    std::size_t n_manifestations() const { return manifestations_.size(); }
    std::size_t n_treatments() const { return treatments_.size(); }
    std::size_t n_subvalues() const { return subvalues_.size(); }

    const std::vector<double>& priors() const { return prior_; }
    const CManifestation& manifestation(std::size_t i) const { return manifestations_[i]; }
    const CTreatment& treatment(std::size_t i) const { return treatments_[i]; }
    const CSubvalue& subvalue(std::size_t i) const { return subvalues_[i]; }
    const std::vector<TreatingPair>& treating_pairs() const { return pairs_; }

    const std::string& disease_id(std::size_t i) const { return kb_.diseases[i].id; }
    const std::string& manifestation_id(std::size_t i) const { return kb_.manifestations[i].id; }
    const std::string& treatment_id(std::size_t i) const { return kb_.treatments[i].id; }
    const std::string& subvalue_id(std::size_t i) const { return kb_.subvalues[i].id; }

    std::optional<std::size_t> disease_index(std::string_view id) const;
    std::optional<std::size_t> manifestation_index(std::string_view id) const;
    std::optional<std::size_t> treatment_index(std::string_view id) const;

    /// Throws ValidationError for unknown or conflicting ids.
    Evidence resolve(const Findings& findings) const;

private:
    KnowledgeBase kb_;
    std::string hash_;
    std::vector<double> prior_;
    std::vector<CManifestation> manifestations_;
    std::vector<CTreatment> treatments_;
    std::vector<CSubvalue> subvalues_;
    std::vector<TreatingPair> pairs_;
    std::unordered_map<std::string, std::size_t> disease_ix_, manifestation_ix_, treatment_ix_;
};

}  // namespace dxr
