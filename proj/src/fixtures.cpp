#include "dxr/fixtures.hpp"

namespace dxr::fixtures {

namespace {

SubvalueNode node(std::string id, std::vector<std::string> diseases, std::vector<std::string> treatments,
                  std::map<std::string, double> table) {
    return SubvalueNode{std::move(id), std::move(diseases), std::move(treatments), std::move(table)};
}

}  // namespace

KnowledgeBase single_pair(double prior) {
    KnowledgeBase kb;
    kb.diseases = {{"d", "synthetic disease", prior}};
    kb.manifestations = {{"m", "synthetic finding", 0.0, {{"d", 1.0}}}};
    kb.treatments = {{"t", "synthetic treatment", {"d"}}};
    kb.subvalues = {node("u", {"d"}, {"t"}, {{"00", 1.0}, {"01", 0.9}, {"10", 0.2}, {"11", 0.95}})};
    return kb;
}

KnowledgeBase two_disease_eye() {
    KnowledgeBase kb;
    kb.diseases = {{"d_s", "eye disease S", 0.03}, {"d_z", "eye disease Z", 0.02}};
    kb.manifestations = {{"m_red", "red eye", 0.01, {{"d_s", 0.8}, {"d_z", 0.7}}},
                         {"m_rash", "dermatomal rash", 0.005, {{"d_z", 0.6}}}};
    kb.treatments = {{"t_acy", "antiviral A", {"d_z"}},
                     {"t_ara", "antiviral B", {"d_s"}},
                     {"t_pred", "steroid", {"d_z"}}};
    // Parent order (d_z, t_acy, t_pred): bit 0 = d_z, bit 1 = t_acy, bit 2 = t_pred.
    kb.subvalues = {
        node("u1", {"d_z"}, {"t_acy", "t_pred"},
             {{"000", 1.0}, {"100", 0.4}, {"010", 0.97}, {"110", 0.85},
              {"001", 0.95}, {"101", 0.5}, {"011", 0.93}, {"111", 0.9}}),
        node("u2", {"d_s"}, {"t_pred"}, {{"00", 1.0}, {"10", 1.0}, {"01", 1.0}, {"11", 0.3}}),
        node("u3", {"d_s"}, {"t_ara"}, {{"00", 1.0}, {"10", 0.5}, {"01", 0.96}, {"11", 0.9}}),
    };
    return kb;
}

KnowledgeBase three_disease_breath() {
    KnowledgeBase kb;
    kb.diseases = {{"d_asthma", "airway disease", 0.05}, {"d_hf", "cardiac disease", 0.04}, {"d_lung", "lung infection", 0.06}};
    kb.manifestations = {{"m_sob", "shortness of breath", 0.02, {{"d_asthma", 0.7}, {"d_hf", 0.6}, {"d_lung", 0.5}}},
                         {"m_fever", "fever", 0.03, {{"d_lung", 0.7}}}};
    kb.treatments = {{"t_dig", "cardiac glycoside", {"d_hf"}},
                     {"t_ery", "macrolide", {"d_lung"}},
                     {"t_theo", "bronchodilator", {"d_asthma"}}};
    kb.subvalues = {
        node("u1", {"d_hf"}, {"t_dig"}, {{"00", 1.0}, {"10", 0.4}, {"01", 0.95}, {"11", 0.85}}),
        node("u2", {}, {"t_theo", "t_dig"}, {{"00", 1.0}, {"10", 1.0}, {"01", 1.0}, {"11", 0.8}}),
        node("u3", {"d_asthma"}, {"t_theo"}, {{"00", 1.0}, {"10", 0.6}, {"01", 0.97}, {"11", 0.9}}),
        node("u4", {}, {"t_theo", "t_ery"}, {{"00", 1.0}, {"10", 1.0}, {"01", 1.0}, {"11", 0.85}}),
        node("u5", {"d_lung"}, {"t_ery"}, {{"00", 1.0}, {"10", 0.5}, {"01", 0.98}, {"11", 0.92}}),
    };
    return kb;
}

}  // namespace dxr::fixtures
