#pragma once
// Small hand-built knowledge bases with the topologies used throughout the
// tests, the CLI demo data and the benchmark. All numbers are synthetic.

#include "dxr/kb.hpp"

namespace dxr::fixtures {

/// One disease `d`, one manifestation `m` (leak 0, strength 1), one treatment
/// `t` with subvalue table (1, 0.9, 0.2, 0.95) over (d, t).
KnowledgeBase single_pair(double prior = 0.1);

/// Two diseases sharing a manifestation. Treatments t_acy and t_pred treat
/// d_z; t_ara treats d_s. u1(d_z; t_acy, t_pred), u2(d_s; t_pred) models the
/// harmful pairing, u3(d_s; t_ara).
KnowledgeBase two_disease_eye();

/// Three diseases sharing a manifestation. t_dig treats d_hf, t_theo treats
/// d_asthma, t_ery treats d_lung; t_theo interacts negatively with both
/// others through treatment-only nodes.
KnowledgeBase three_disease_breath();

}  // namespace dxr::fixtures
