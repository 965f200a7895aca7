#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wagedyn/core.hpp"
#include "wagedyn/rng.hpp"

namespace wagedyn {

/// Scalar indexed by year: default value plus per-year overrides.
struct YearSeries {
    double value = 0.0;
    std::map<int, double> by_year;

    double operator()(int t) const {
        auto it = by_year.find(t);
        return it == by_year.end() ? value : it->second;
    }
};

/// Scalar indexed by cohort: default value plus per-cohort overrides.
struct CohortSeries {
    double value = 0.0;
    std::map<int, double> by_cohort;

    double operator()(int c) const {
        auto it = by_cohort.find(c);
        return it == by_cohort.end() ? value : it->second;
    }
};

/// Scalar indexed by (year, cohort); lookup precedence: (year, cohort), year, default.
struct YearCohortSeries {
    double value = 0.0;
    std::map<int, double> by_year;
    std::map<std::pair<int, int>, double> by_year_cohort;

    double operator()(int t, int c) const {
        if (auto it = by_year_cohort.find({t, c}); it != by_year_cohort.end()) return it->second;
        if (auto it = by_year.find(t); it != by_year.end()) return it->second;
        return value;
    }
};

// ---------------------------------------------------------------------------
// Latent skill processes.  Skills start accumulating at labor-market entry:
// a worker from cohort c is first observed in year c+1 and
//   RandomWalk:  theta_t = psi + sum_{s=c+1..t} nu_s
//   Hip:         theta_t = psi + Lambda_t(c) delta + sum nu_s,
//                Lambda_t(c) = sum_{s=c+1..t} lambda_s(c)
//   FeAr1:       theta_t = psi + phi_t, phi_c = 0, phi_t = rho_t phi_{t-1} + nu_t
// ---------------------------------------------------------------------------

struct RandomWalkSkills {
    CohortSeries var_psi;
    YearCohortSeries var_nu;
};

struct HipSkills {
    CohortSeries var_psi;
    CohortSeries var_delta;
    CohortSeries cov_psi_delta;
    YearCohortSeries lambda;
    YearCohortSeries var_nu;
};

struct FeAr1Skills {
    CohortSeries var_psi;
    YearSeries rho;
    YearCohortSeries var_nu;
};

using SkillProcess = std::variant<RandomWalkSkills, HipSkills, FeAr1Skills>;

// ---------------------------------------------------------------------------
// Non-skill shocks.  MA(q) innovations are truncated at entry:
//   eps_t = sum_{j=0..min(q, t-c-1)} beta_j xi_{t-j},  beta_0 = 1.
// The AR(1) variant adds an autoregressive component started at zero at entry.
// ---------------------------------------------------------------------------

struct MaShocks {
    int q = 0;
    std::vector<double> beta = {1.0};  // beta[0] must be 1
    YearCohortSeries var_xi;
};

struct Ar1PlusMaShocks {
    double rho_eps = 0.0;
    YearCohortSeries var_nu_eps;
    MaShocks ma;
};

using ShockProcess = std::variant<MaShocks, Ar1PlusMaShocks>;

struct FirmLayer {
    double var_kappa = 0.0;
    YearSeries stay_prob{1.0, {}};
};

/// J latent skills evolving as a joint random walk: the within-period
/// covariance matrix grows by a PSD step each year.
struct MultiSkillBlock {
    int n_skills = 1;
    Eigen::MatrixXd sigma0;                     // covariance at the earliest entry observation
    Eigen::MatrixXd sigma_step;                 // default yearly PSD increment
    std::map<int, Eigen::MatrixXd> step_by_year;
    // alpha[occ][skill] = intensity series over years
    std::vector<std::vector<YearSeries>> alpha;

    const Eigen::MatrixXd& step(int t) const {
        auto it = step_by_year.find(t);
        return it == step_by_year.end() ? sigma_step : it->second;
    }
};

struct OccupationLayer {
    std::vector<std::string> occupations;
    std::vector<YearSeries> gamma;    // per occupation
    std::vector<YearSeries> mu_occ;   // per occupation
    Eigen::MatrixXd transition;       // row-stochastic, first-order Markov
    std::vector<double> initial_dist; // empty => stationary distribution of `transition`
    std::optional<MultiSkillBlock> multi;
    // 0 disables; >0 makes switching depend on current skill, deliberately
    // violating exogenous-mobility for test power studies
    double sorting_strength = 0.0;

    int n_occ() const { return static_cast<int>(occupations.size()); }
    int index_of(const std::string& name) const {
        for (int i = 0; i < n_occ(); ++i)
            if (occupations[i] == name) return i;
        throw PreconditionError("unknown occupation '" + name + "'");
    }
};

struct TestLayer {
    double tau = 1.0;
    double var_eta = 0.0;
};

struct Demographics {
    double college_share = 0.5;
    double nonwhite_share = 0.2;
};

struct DgpConfig {
    int year_lo = 0, year_hi = 0;
    int cohort_lo = 0, cohort_hi = 0;
    int persons_per_cohort = 0;
    std::map<int, int> persons_by_cohort;  // overrides persons_per_cohort

    YearSeries mu{1.0, {}};
    int t_star = 0;  // normalization year, mu(t_star) must equal 1

    SkillProcess skills = RandomWalkSkills{};
    ShockProcess shocks = MaShocks{};
    std::optional<FirmLayer> firm;
    std::optional<OccupationLayer> occupation;
    std::optional<TestLayer> test;
    Demographics demographics;
    int k = 1;

    int n_cohort(int c) const {
        auto it = persons_by_cohort.find(c);
        return it == persons_by_cohort.end() ? persons_per_cohort : it->second;
    }
    /// First year a worker from cohort c can appear (experience 1).
    int entry_year(int c) const { return c + 1; }
    bool observed(int c, int t) const { return t >= std::max(year_lo, c + 1) && t <= year_hi; }
};

namespace detail {

inline void check_nonneg(double v, const std::string& field) {
    if (!(v >= 0.0)) throw PreconditionError("invalid config: " + field + " must be >= 0");
}

inline void check_series_nonneg(const YearCohortSeries& s, const std::string& field) {
    check_nonneg(s.value, field);
    for (auto& [t, v] : s.by_year) check_nonneg(v, field);
    for (auto& [tc, v] : s.by_year_cohort) check_nonneg(v, field);
}

inline void check_cohort_nonneg(const CohortSeries& s, const std::string& field) {
    check_nonneg(s.value, field);
    for (auto& [c, v] : s.by_cohort) check_nonneg(v, field);
}

inline void check_psd(const Eigen::MatrixXd& m, const std::string& field) {
    if (m.rows() != m.cols()) throw PreconditionError("invalid config: " + field + " not square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw PreconditionError("invalid config: " + field + " not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw PreconditionError("invalid config: " + field + " not positive semidefinite");
}

}  // namespace detail

inline void validate(const DgpConfig& cfg) {
    using detail::check_cohort_nonneg;
    using detail::check_nonneg;
    using detail::check_series_nonneg;

    if (cfg.year_lo > cfg.year_hi) throw PreconditionError("invalid config: years range empty");
    if (cfg.cohort_lo > cfg.cohort_hi) throw PreconditionError("invalid config: cohorts range empty");
    if (cfg.cohort_hi >= cfg.year_hi)
        throw PreconditionError("invalid config: cohorts must enter before year_hi");
    if (cfg.persons_per_cohort < 0) throw PreconditionError("invalid config: persons_per_cohort");
    if (cfg.k < 1) throw PreconditionError("invalid config: k must be >= 1");
    for (int t = cfg.year_lo; t <= cfg.year_hi; ++t)
        if (!(cfg.mu(t) > 0.0)) throw PreconditionError("invalid config: mu must be > 0 in year " + std::to_string(t));
    if (cfg.t_star < cfg.year_lo || cfg.t_star > cfg.year_hi)
        throw PreconditionError("invalid config: t_star outside years");
    if (std::abs(cfg.mu(cfg.t_star) - 1.0) > 1e-9)
        throw PreconditionError("invalid config: mu(t_star) must equal 1");

    if (const auto* rw = std::get_if<RandomWalkSkills>(&cfg.skills)) {
        check_cohort_nonneg(rw->var_psi, "var_psi");
        check_series_nonneg(rw->var_nu, "var_nu");
    } else if (const auto* hip = std::get_if<HipSkills>(&cfg.skills)) {
        check_cohort_nonneg(hip->var_psi, "var_psi");
        check_series_nonneg(hip->var_nu, "var_nu");
        for (int c = cfg.cohort_lo; c <= cfg.cohort_hi; ++c) {
            if (!(hip->var_delta(c) > 0.0))
                throw PreconditionError("invalid config: var_delta must be > 0");
            double bound = std::sqrt(hip->var_psi(c) * hip->var_delta(c));
            if (std::abs(hip->cov_psi_delta(c)) > bound + 1e-12)
                throw PreconditionError("invalid config: |cov_psi_delta| exceeds sqrt(var_psi*var_delta)");
            for (int t = c + 1; t <= cfg.year_hi; ++t)
                if (hip->lambda(t, c) < 0.0)
                    throw PreconditionError("invalid config: lambda must be >= 0");
        }
    } else if (const auto* ar = std::get_if<FeAr1Skills>(&cfg.skills)) {
        check_cohort_nonneg(ar->var_psi, "var_psi");
        check_series_nonneg(ar->var_nu, "var_nu");
    }

    const MaShocks* ma = std::get_if<MaShocks>(&cfg.shocks);
    if (const auto* arma = std::get_if<Ar1PlusMaShocks>(&cfg.shocks)) {
        if (!(std::abs(arma->rho_eps) < 1.0))
            throw PreconditionError("invalid config: |rho_eps| must be < 1");
        check_series_nonneg(arma->var_nu_eps, "var_nu_eps");
        ma = &arma->ma;
    }
    if (ma) {
        if (ma->q < 0) throw PreconditionError("invalid config: q must be >= 0");
        if (ma->q > cfg.k - 1)
            throw PreconditionError("invalid config: MA order q must satisfy q <= k-1");
        if (static_cast<int>(ma->beta.size()) != ma->q + 1)
            throw PreconditionError("invalid config: beta must have q+1 entries");
        if (std::abs(ma->beta[0] - 1.0) > 1e-12)
            throw PreconditionError("invalid config: beta[0] must equal 1");
        check_series_nonneg(ma->var_xi, "var_xi");
    }

    if (cfg.firm) {
        check_nonneg(cfg.firm->var_kappa, "var_kappa");
        for (int t = cfg.year_lo; t <= cfg.year_hi; ++t) {
            double p = cfg.firm->stay_prob(t);
            if (p < 0.0 || p > 1.0) throw PreconditionError("invalid config: stay_prob not a probability");
        }
    }

    if (cfg.occupation) {
        const auto& oc = *cfg.occupation;
        int n = oc.n_occ();
        if (n < 1) throw PreconditionError("invalid config: occupations empty");
        if (static_cast<int>(oc.gamma.size()) != n || static_cast<int>(oc.mu_occ.size()) != n)
            throw PreconditionError("invalid config: gamma/mu_occ must have one series per occupation");
        if (oc.transition.rows() != n || oc.transition.cols() != n)
            throw PreconditionError("invalid config: transition kernel must be n_occ x n_occ");
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) {
                if (oc.transition(i, j) < 0.0)
                    throw PreconditionError("invalid config: transition probabilities must be >= 0");
                s += oc.transition(i, j);
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw PreconditionError("invalid config: transition row " + std::to_string(i) + " does not sum to 1");
        }
        for (int o = 0; o < n; ++o)
            for (int t = cfg.year_lo; t <= cfg.year_hi; ++t)
                if (!(oc.mu_occ[o](t) > 0.0))
                    throw PreconditionError("invalid config: mu_occ must be > 0");
        if (!oc.initial_dist.empty() && static_cast<int>(oc.initial_dist.size()) != n)
            throw PreconditionError("invalid config: initial_dist size mismatch");
        if (oc.multi) {
            const auto& m = *oc.multi;
            if (m.n_skills < 1) throw PreconditionError("invalid config: n_skills must be >= 1");
            detail::check_psd(m.sigma0, "sigma0");
            detail::check_psd(m.sigma_step, "sigma_step");
            for (auto& [t, s] : m.step_by_year) detail::check_psd(s, "sigma_step[" + std::to_string(t) + "]");
            if (static_cast<int>(m.alpha.size()) != n)
                throw PreconditionError("invalid config: alpha must have one row per occupation");
            for (const auto& row : m.alpha)
                if (static_cast<int>(row.size()) != m.n_skills)
                    throw PreconditionError("invalid config: alpha row size != n_skills");
        }
    }

    if (cfg.test) detail::check_nonneg(cfg.test->var_eta, "var_eta");
}

/// Stationary distribution of a row-stochastic kernel (power iteration).
inline std::vector<double> stationary_distribution(const Eigen::MatrixXd& kernel) {
    int n = static_cast<int>(kernel.rows());
    Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd next = kernel.transpose() * pi;
        next /= next.sum();
        if ((next - pi).cwiseAbs().maxCoeff() < 1e-14) {
            pi = next;
            break;
        }
        pi = next;
    }
    return std::vector<double>(pi.data(), pi.data() + n);
}

inline std::vector<double> occupation_initial_dist(const OccupationLayer& oc) {
    return oc.initial_dist.empty() ? stationary_distribution(oc.transition) : oc.initial_dist;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Ground-truth components for one simulated observation.
struct LatentObs {
    long person_id = 0;
    int year = 0;
    double psi = 0.0;
    double delta = 0.0;           // HIP growth factor
    std::vector<double> theta;    // J entries (J=1 unless multi-skill)
    double phi_skill = 0.0;       // AR(1) skill component
    double eps = 0.0;             // total non-skill shock
    double phi_eps = 0.0;         // AR component of eps
    double eps_ma = 0.0;          // MA component of eps
    double kappa = 0.0;
    int occ = -1;
    long firm = -1;
};

struct LatentRecord {
    std::vector<LatentObs> rows;  // aligned with the panel rows
};

namespace detail {

/// Composes the residual from latent components; simulate() and the identity
/// checker must agree bit-for-bit, so both call this.
inline double compose_residual(const DgpConfig& cfg, const LatentObs& l) {
    double w = 0.0;
    if (cfg.occupation) {
        const auto& oc = *cfg.occupation;
        w += oc.gamma[l.occ](l.year);
        if (oc.multi) {
            for (int j = 0; j < oc.multi->n_skills; ++j)
                w += oc.mu_occ[l.occ](l.year) * oc.multi->alpha[l.occ][j](l.year) * l.theta[j];
        } else {
            w += oc.mu_occ[l.occ](l.year) * l.theta[0];
        }
    } else {
        w += cfg.mu(l.year) * l.theta[0];
    }
    w += l.kappa;
    w += l.eps;
    return w;
}

}  // namespace detail

/// Simulates one panel.  Deterministic given (config, seed); persons are
/// simulated from independent streams keyed by (seed, person_id), so results
/// do not depend on traversal order or worker count.
inline std::pair<Panel, LatentRecord> simulate(const DgpConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Panel panel;
    LatentRecord latents;

    std::vector<double> init_dist;
    Eigen::LLT<Eigen::MatrixXd> sigma0_chol;
    std::map<int, Eigen::LLT<Eigen::MatrixXd>> step_chol;
    int n_skills = 1;
    if (cfg.occupation) {
        init_dist = occupation_initial_dist(*cfg.occupation);
        if (cfg.occupation->multi) {
            const auto& m = *cfg.occupation->multi;
            n_skills = m.n_skills;
            Eigen::MatrixXd s0 = m.sigma0;
            s0.diagonal().array() += 1e-14;
            sigma0_chol.compute(s0);
            for (int t = cfg.cohort_lo + 2; t <= cfg.year_hi; ++t) {
                Eigen::MatrixXd st = m.step(t);
                st.diagonal().array() += 1e-14;
                step_chol[t].compute(st);
            }
        }
    }

    long person_id = 0;
    for (int c = cfg.cohort_lo; c <= cfg.cohort_hi; ++c) {
        int n = cfg.n_cohort(c);
        for (int i = 0; i < n; ++i, ++person_id) {
            Rng rng = Rng::for_person(seed, person_id);

            std::string educ = rng.uniform() < cfg.demographics.college_share ? "CL" : "NC";
            std::string race = rng.uniform() < cfg.demographics.nonwhite_share ? "B" : "W";

            // person-level draws
            double psi = 0.0, delta = 0.0;
            if (const auto* rw = std::get_if<RandomWalkSkills>(&cfg.skills)) {
                psi = rng.normal(0.0, std::sqrt(rw->var_psi(c)));
            } else if (const auto* hip = std::get_if<HipSkills>(&cfg.skills)) {
                double vp = hip->var_psi(c), vd = hip->var_delta(c), cpd = hip->cov_psi_delta(c);
                double z1 = rng.normal(), z2 = rng.normal();
                psi = std::sqrt(vp) * z1;
                if (vp > 0.0) {
                    double b = cpd / vp;
                    double resid = std::max(0.0, vd - cpd * cpd / vp);
                    delta = b * psi + std::sqrt(resid) * z2;
                } else {
                    delta = std::sqrt(vd) * z2;
                }
            } else if (const auto* ar = std::get_if<FeAr1Skills>(&cfg.skills)) {
                psi = rng.normal(0.0, std::sqrt(ar->var_psi(c)));
            }

            int first = c + 1;
            std::vector<double> theta(n_skills, 0.0);
            double phi_skill = 0.0;
            double phi_eps = 0.0;
            std::vector<double> xi_hist;  // MA innovations, index s-(c+1)
            int occ = -1;
            long firm = -1;
            long firm_counter = 0;
            double kappa = 0.0;

            const MaShocks* ma = std::get_if<MaShocks>(&cfg.shocks);
            const Ar1PlusMaShocks* arma = std::get_if<Ar1PlusMaShocks>(&cfg.shocks);
            if (arma) ma = &arma->ma;

            for (int t = first; t <= cfg.year_hi; ++t) {
                // skills
                if (cfg.occupation && cfg.occupation->multi) {
                    const auto& m = *cfg.occupation->multi;
                    Eigen::VectorXd z(m.n_skills);
                    for (int j = 0; j < m.n_skills; ++j) z(j) = rng.normal();
                    if (t == first) {
                        // covariance at entry equals the accumulated sigma path
                        Eigen::MatrixXd sig = m.sigma0;
                        for (int s = cfg.cohort_lo + 2; s <= t; ++s) sig += m.step(s);
                        sig.diagonal().array() += 1e-14;
                        Eigen::VectorXd v = Eigen::LLT<Eigen::MatrixXd>(sig).matrixL() * z;
                        for (int j = 0; j < m.n_skills; ++j) theta[j] = v(j);
                    } else {
                        Eigen::VectorXd v = step_chol.at(t).matrixL() * z;
                        for (int j = 0; j < m.n_skills; ++j) theta[j] += v(j);
                    }
                } else if (const auto* rw = std::get_if<RandomWalkSkills>(&cfg.skills)) {
                    theta[0] = (t == first ? psi : theta[0]) + rng.normal(0.0, std::sqrt(rw->var_nu(t, c)));
                } else if (const auto* hip = std::get_if<HipSkills>(&cfg.skills)) {
                    double base = (t == first) ? psi : theta[0];
                    theta[0] = base + hip->lambda(t, c) * delta + rng.normal(0.0, std::sqrt(hip->var_nu(t, c)));
                } else if (const auto* arp = std::get_if<FeAr1Skills>(&cfg.skills)) {
                    phi_skill = arp->rho(t) * phi_skill + rng.normal(0.0, std::sqrt(arp->var_nu(t, c)));
                    theta[0] = psi + phi_skill;
                }

                // non-skill shock
                double eps_ma_t = 0.0;
                {
                    xi_hist.push_back(rng.normal(0.0, std::sqrt(ma->var_xi(t, c))));
                    int e = t - c - 1;  // index of current xi
                    int jmax = std::min(ma->q, e);
                    for (int j = 0; j <= jmax; ++j) eps_ma_t += ma->beta[j] * xi_hist[e - j];
                }
                double eps_t = eps_ma_t;
                if (arma) {
                    phi_eps = arma->rho_eps * phi_eps + rng.normal(0.0, std::sqrt(arma->var_nu_eps(t, c)));
                    eps_t += phi_eps;
                }

                // occupation path
                if (cfg.occupation) {
                    const auto& oc = *cfg.occupation;
                    if (t == first) {
                        occ = rng.discrete(init_dist);
                    } else {
                        Eigen::VectorXd row = oc.transition.row(occ);
                        occ = rng.discrete(std::vector<double>(row.data(), row.data() + row.size()));
                    }
                    if (oc.sorting_strength > 0.0 && rng.uniform() < oc.sorting_strength) {
                        double th = theta[0];
                        occ = th > 0.0 ? oc.n_occ() - 1 : 0;
                    }
                }

                // firm path
                if (cfg.firm) {
                    bool draw_new = (t == first) || rng.uniform() > cfg.firm->stay_prob(t);
                    if (draw_new) {
                        firm = person_id * 1000 + (firm_counter++);
                        kappa = rng.normal(0.0, std::sqrt(cfg.firm->var_kappa));
                    }
                }

                // test score noise drawn unconditionally to keep the stream layout fixed
                double eta = cfg.test ? rng.normal(0.0, std::sqrt(cfg.test->var_eta)) : 0.0;

                if (t < cfg.year_lo) continue;  // burn-in before the observation window

                LatentObs l;
                l.person_id = person_id;
                l.year = t;
                l.psi = psi;
                l.delta = delta;
                l.theta = theta;
                l.phi_skill = phi_skill;
                l.eps = eps_t;
                l.phi_eps = phi_eps;
                l.eps_ma = eps_ma_t;
                l.kappa = cfg.firm ? kappa : 0.0;
                l.occ = occ;
                l.firm = firm;

                PanelObservation o;
                o.person_id = person_id;
                o.year = t;
                o.cohort = c;
                o.educ = educ;
                o.race = race;
                o.exper = t - c;
                if (cfg.occupation) o.occ = cfg.occupation->occupations[occ];
                if (cfg.firm) o.firm = firm;
                o.log_wage = detail::compose_residual(cfg, l);
                if (cfg.test) o.tscore = cfg.test->tau * theta[0] + eta;

                panel.rows.push_back(std::move(o));
                latents.rows.push_back(std::move(l));
            }
        }
    }
    return {std::move(panel), std::move(latents)};
}

/// Max |log_wage - recomposition from latents| over the panel.
inline double wage_identity_error(const DgpConfig& cfg, const Panel& panel, const LatentRecord& latents) {
    if (panel.rows.size() != latents.rows.size())
        throw PreconditionError("panel and latent record have different lengths");
    double worst = 0.0;
    for (std::size_t i = 0; i < panel.rows.size(); ++i)
        worst = std::max(worst, std::abs(panel.rows[i].log_wage - detail::compose_residual(cfg, latents.rows[i])));
    return worst;
}

}  // namespace wagedyn
