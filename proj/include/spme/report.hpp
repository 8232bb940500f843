#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "spme/analysis.hpp"
#include "spme/barenblatt.hpp"
#include "spme/extinction.hpp"
#include "spme/pme_solver.hpp"

namespace spme {

using Json = nlohmann::ordered_json;

/// Non-finite numbers and missing values serialise as null.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline Json num(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

inline Json to_json(const Grid1D& g) { return {{"a", g.a}, {"b", g.b}, {"n", g.n}}; }

inline Json to_json(const SolverConfig& c) {
    return {{"m", c.m},
            {"nu", c.nu},
            {"epsilon", c.epsilon},
            {"grid", to_json(c.grid)},
            {"t_end", c.t_end},
            {"cfl", c.cfl},
            {"extinction_tol", num(c.extinction_tol)},
            {"max_steps", c.max_steps},
            {"max_dt", num(c.max_dt)},
            {"stop_when_extinct", c.stop_when_extinct}};
}

inline Json to_json(const Profile& p) {
    return std::visit(
        [](const auto& v) -> Json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroProfile>) {
                return {{"kind", "zero"}};
            } else if constexpr (std::is_same_v<T, BumpProfile>) {
                return {{"kind", "bump"}, {"center", v.center}, {"half_width", v.half_width}, {"amplitude", v.amplitude}};
            } else {
                return {{"kind", "barenblatt"}, {"m", v.profile.m},       {"C", v.profile.C},
                        {"t0", v.profile.t0},   {"center", v.profile.center}, {"time", v.time}};
            }
        },
        p);
}

inline Json to_json(const BarenblattProfile& b) {
    return {{"m", b.m}, {"C", b.C}, {"t0", b.t0}, {"center", b.center}, {"alpha", b.alpha()}, {"k", b.k()},
            {"mass", b.mass()}};
}

inline Json to_json(const DiagnosticsSummary& d) {
    return {{"energy_rhs", d.energy_rhs},
            {"energy_lhs_max", d.energy_lhs_max},
            {"energy_residual", d.energy_residual},
            {"total_dissipation", d.total_dissipation},
            {"sup_time_weighted_grad", d.sup_time_weighted_grad},
            {"time_weighted_laplacian", d.time_weighted_laplacian},
            {"u_min", d.u_min},
            {"u_max", d.u_max},
            {"energy_violation", d.energy_violation}};
}

inline Json to_json(const McSummary& s) {
    Json rows = Json::array();
    for (std::size_t h = 0; h < s.horizons.size(); ++h)
        rows.push_back({{"T", s.horizons[h]},
                        {"p_ext", s.p_ext[h]},
                        {"p_ext_lo", s.p_ext_lo[h]},
                        {"p_ext_hi", s.p_ext_hi[h]},
                        {"p_hat", s.p_hat[h]},
                        {"p_hat_lo", s.p_hat_lo[h]},
                        {"p_hat_hi", s.p_hat_hi[h]},
                        {"p_hat_paper", s.p_hat_paper[h]}});
    return {{"paths", s.paths},
            {"valid", s.valid},
            {"failed", s.failed},
            {"m", s.m},
            {"nu", s.nu},
            {"a", s.a},
            {"b", s.b},
            {"M_bar", s.M_bar},
            {"epsilon", s.epsilon},
            {"convention", to_string(s.convention)},
            {"snapshot_dt", s.snapshot_dt},
            {"pathwise_checked", s.pathwise_checked},
            {"pathwise_held", s.pathwise_held},
            {"cdf", rows}};
}

inline Json to_json(const ExtinctionRecord& r) {
    return {{"index", r.index},
            {"seed", r.seed},
            {"T_extinct", num(r.T_extinct)},
            {"T_hat", num(r.T_hat)},
            {"T_hat_paper", num(r.T_hat_paper)},
            {"T_hat_heuristic", num(r.T_hat_heuristic)},
            {"epsilon", r.epsilon},
            {"config_digest", r.config_digest},
            {"path_digest", io::hex(r.path_digest)},
            {"failed", r.failed},
            {"failure", r.failure}};
}

inline Json to_json(const ContractionReport& r) {
    Json pairs = Json::array();
    for (const auto& p : r.pairs)
        pairs.push_back({{"eps", p.eps},
                         {"eps_hat", p.eps_hat},
                         {"truncated", p.truncated},
                         {"truncated_se", p.truncated_se},
                         {"truncated_at", p.truncated_at},
                         {"plain", p.plain},
                         {"initial_term", p.initial_term}});
    return {{"kappa", r.kappa},
            {"K", {r.K_lo, r.K_hi}},
            {"paths", r.paths},
            {"theta_fit", num(r.theta_fit)},
            {"common_noise", r.common_noise},
            {"truncation_bounded", r.truncation_bounded},
            {"pairs", pairs}};
}

inline Json to_json(const CauchyTable& t) {
    Json rows = Json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"eps", r.eps},
                        {"eps_next", r.eps_next},
                        {"sup_l1", r.sup_l1},
                        {"sup_se", r.sup_se},
                        {"integrated", r.integrated},
                        {"integrated_head", r.integrated_head},
                        {"consistent", r.consistent}});
    return {{"tau", t.tau}, {"paths", t.paths}, {"common_noise", t.common_noise}, {"rows", rows}};
}

inline Json to_json(const std::vector<WeakFormRow>& rows) {
    Json out = Json::array();
    for (const auto& r : rows)
        out.push_back({{"phi", r.phi},
                       {"T", r.T},
                       {"lhs", r.lhs},
                       {"drift_term", r.drift_term},
                       {"noise_term", r.noise_term},
                       {"residual", r.residual}});
    return out;
}

inline Json to_json(const DominationReport& r) {
    return {{"max_violation", num(r.max_violation)},
            {"tolerance", r.tolerance},
            {"points_checked", r.points_checked},
            {"points_over_tolerance", r.points_over_tolerance},
            {"interpolation_bound", r.interpolation_bound},
            {"per_trace_max", r.per_trace_max}};
}

/// Columns eps, eps_next, sup_l1, sup_se, integrated, integrated_head, consistent.
inline void write_cauchy_csv(std::ostream& os, const CauchyTable& t) {
    os << "eps,eps_next,sup_l1,sup_se,integrated,integrated_head,consistent\n";
    for (const auto& r : t.rows)
        os << io::fmt(r.eps) << ',' << io::fmt(r.eps_next) << ',' << io::fmt(r.sup_l1) << ',' << io::fmt(r.sup_se)
           << ',' << io::fmt(r.integrated) << ',' << io::fmt(r.integrated_head) << ',' << (r.consistent ? 1 : 0)
           << '\n';
}

/// Columns eps, eps_hat, truncated, truncated_se, truncated_at, plain, initial_term.
inline void write_contraction_csv(std::ostream& os, const ContractionReport& r) {
    os << "eps,eps_hat,truncated,truncated_se,truncated_at,plain,initial_term\n";
    for (const auto& p : r.pairs)
        os << io::fmt(p.eps) << ',' << io::fmt(p.eps_hat) << ',' << io::fmt(p.truncated) << ','
           << io::fmt(p.truncated_se) << ',' << io::fmt(p.truncated_at) << ',' << io::fmt(p.plain) << ','
           << io::fmt(p.initial_term) << '\n';
}

/// Columns t, energy, dissipation, laplacian_sq, grad_sq, u_min, u_max, dt.
inline void write_diagnostics_csv(std::ostream& os, const SolveTrace& tr) {
    const auto& d = tr.steps;
    os << "t,dt,energy,dissipation,laplacian_sq,grad_sq,u_min,u_max\n";
    for (std::size_t k = 0; k < d.size(); ++k)
        os << io::fmt(d.time[k]) << ',' << io::fmt(d.dt[k]) << ',' << io::fmt(d.energy[k]) << ','
           << io::fmt(d.dissipation[k]) << ',' << io::fmt(d.laplacian_sq[k]) << ',' << io::fmt(d.grad_sq[k]) << ','
           << io::fmt(d.u_min[k]) << ',' << io::fmt(d.u_max[k]) << '\n';
}

}  // namespace spme
