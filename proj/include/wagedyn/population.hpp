#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wagedyn/dgp.hpp"

namespace wagedyn {

/// Selects the sub-population a moment conditions on.  Experience selectors
/// resolve to cohorts at the later of the two years of a covariance.
struct GroupSel {
    std::vector<int> cohorts;  // explicit cohort list; empty => use experience window
    int exp_lo = 0, exp_hi = 0;
    bool by_experience = false;

    static GroupSel cohort(int c) { return GroupSel{{c}, 0, 0, false}; }
    static GroupSel cohort_range(int lo, int hi) {
        GroupSel g;
        for (int c = lo; c <= hi; ++c) g.cohorts.push_back(c);
        return g;
    }
    static GroupSel experience(int e_lo, int e_hi) {
        GroupSel g;
        g.by_experience = true;
        g.exp_lo = e_lo;
        g.exp_hi = e_hi;
        return g;
    }

    std::vector<int> resolve(const DgpConfig& cfg, int t_ref) const {
        if (!by_experience) return cohorts;
        std::vector<int> out;
        for (int e = exp_lo; e <= exp_hi; ++e) {
            int c = t_ref - e;
            if (c >= cfg.cohort_lo && c <= cfg.cohort_hi) out.push_back(c);
        }
        return out;
    }
};

/// Occupation-path conditioning for occupation-layer moments: a set of
/// (year, occupation index) pins.  Years not pinned are marginalized.
struct OccCondition {
    std::vector<std::pair<int, int>> pins;  // sorted by year internally

    bool pinned(int year, int* occ = nullptr) const {
        for (auto& [y, o] : pins)
            if (y == year) {
                if (occ) *occ = o;
                return true;
            }
        return false;
    }
};

/// Exact model-implied moments for a DgpConfig.  Builds per-cohort prefix
/// tables once; each covariance lookup is then O(span) at worst.
class PopulationEvaluator {
public:
    explicit PopulationEvaluator(const DgpConfig& cfg) : cfg_(cfg) {
        validate(cfg_);
        if (cfg_.occupation && cfg_.occupation->sorting_strength > 0.0)
            throw PreconditionError(
                "population moments require exogenous occupation mobility (sorting_strength == 0)");
        first_entry_ = cfg_.cohort_lo + 1;
        int span = cfg_.year_hi - first_entry_ + 1;
        if (span < 1) throw PreconditionError("invalid config: no observable years");

        for (int c = cfg_.cohort_lo; c <= cfg_.cohort_hi; ++c) build_cohort_tables(c);

        if (cfg_.occupation) {
            const auto& oc = *cfg_.occupation;
            init_dist_ = occupation_initial_dist(oc);
            int n = oc.n_occ();
            kernel_powers_.push_back(Eigen::MatrixXd::Identity(n, n));
            for (int s = 1; s <= cfg_.year_hi - cfg_.cohort_lo; ++s)
                kernel_powers_.push_back(kernel_powers_.back() * oc.transition);
            if (oc.multi) {
                const auto& m = *oc.multi;
                Eigen::MatrixXd sig = m.sigma0;
                sigma_by_year_[first_entry_] = sig;
                for (int t = first_entry_ + 1; t <= cfg_.year_hi; ++t) {
                    sig += m.step(t);
                    sigma_by_year_[t] = sig;
                }
            }
        }
    }

    const DgpConfig& config() const { return cfg_; }

    // ----- latent second moments, per cohort ------------------------------

    /// cov(theta_t, theta_t2 | c) for the scalar skill process.
    double cov_theta(int c, int t, int t2) const {
        int lo = std::min(t, t2), hi = std::max(t, t2);
        check_years(c, lo, hi);
        const auto& tab = tables_.at(c);
        if (const auto* rw = std::get_if<RandomWalkSkills>(&cfg_.skills)) {
            return rw->var_psi(c) + tab.nu_prefix[idx(c, lo)];
        }
        if (const auto* hip = std::get_if<HipSkills>(&cfg_.skills)) {
            double lam_lo = tab.lam_prefix[idx(c, lo)];
            double lam_hi = tab.lam_prefix[idx(c, hi)];
            return hip->var_psi(c) + lam_lo * lam_hi * hip->var_delta(c) +
                   (lam_lo + lam_hi) * hip->cov_psi_delta(c) + tab.nu_prefix[idx(c, lo)];
        }
        const auto& ar = std::get<FeAr1Skills>(cfg_.skills);
        double prod = 1.0;
        for (int j = lo + 1; j <= hi; ++j) prod *= ar.rho(j);
        return ar.var_psi(c) + prod * tab.var_phi[idx(c, lo)];
    }

    double var_theta(int c, int t) const { return cov_theta(c, t, t); }

    /// cov(theta_{j,t}, theta_{j2,t2} | c) under the multi-skill layer.
    double cov_theta_multi(int c, int t, int t2, int j, int j2) const {
        int lo = std::min(t, t2);
        check_years(c, lo, std::max(t, t2));
        return sigma_by_year_.at(lo)(j, j2);
    }

    double cov_eps(int c, int t, int t2) const {
        int lo = std::min(t, t2), hi = std::max(t, t2);
        check_years(c, lo, hi);
        const MaShocks* ma = std::get_if<MaShocks>(&cfg_.shocks);
        const Ar1PlusMaShocks* arma = std::get_if<Ar1PlusMaShocks>(&cfg_.shocks);
        if (arma) ma = &arma->ma;
        int gap = hi - lo;
        double cov = 0.0;
        // MA part: eps_hi and eps_lo share innovations xi_{lo-j2} when gap+j2 <= q
        for (int j2 = 0; j2 + gap <= ma->q; ++j2) {
            int s = lo - j2;  // innovation year
            if (s < c + 1) break;
            cov += ma->beta[j2 + gap] * ma->beta[j2] * ma->var_xi(s, c);
        }
        if (arma) {
            double p = 1.0;
            for (int s = 0; s < gap; ++s) p *= arma->rho_eps;
            cov += p * tables_.at(c).var_phi_eps[idx(c, lo)];
        }
        return cov;
    }

    double cov_kappa(int t, int t2) const {
        if (!cfg_.firm) return 0.0;
        int lo = std::min(t, t2), hi = std::max(t, t2);
        double p = cfg_.firm->var_kappa;
        for (int s = lo + 1; s <= hi; ++s) p *= cfg_.firm->stay_prob(s);
        return p;
    }

    // ----- wage residual moments ------------------------------------------

    /// Unconditional cov(w_t, w_t2 | c); occupations marginalized if present.
    double cov_w(int c, int t, int t2) const {
        double base = cov_eps(c, t, t2) + cov_kappa(t, t2);
        if (!cfg_.occupation) return cfg_.mu(t) * cfg_.mu(t2) * cov_theta(c, t, t2) + base;

        const auto& oc = *cfg_.occupation;
        int n = oc.n_occ();
        int lo = std::min(t, t2), hi = std::max(t, t2);
        Eigen::VectorXd m_lo = marginal(c, lo);
        const Eigen::MatrixXd& trans = kernel_powers_.at(hi - lo);
        double cov = base;
        double mean_lo = 0.0, mean_hi = 0.0;
        Eigen::VectorXd m_hi = Eigen::VectorXd::Zero(n);
        for (int a = 0; a < n; ++a) {
            mean_lo += m_lo(a) * oc.gamma[a](lo);
            for (int b = 0; b < n; ++b) m_hi(b) += m_lo(a) * trans(a, b);
        }
        for (int b = 0; b < n; ++b) mean_hi += m_hi(b) * oc.gamma[b](hi);
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                double pab = m_lo(a) * trans(a, b);
                if (pab == 0.0) continue;
                double inner = skill_inner(c, a, b, lo, hi);
                cov += pab * (inner + (oc.gamma[a](lo) - mean_lo) * (oc.gamma[b](hi) - mean_hi));
            }
        }
        return cov;
    }

    /// cov(w_t, w_t2 | c, occupation pins).  Both t and t2 may be pinned or
    /// marginal; conditioning years must bracket consistently with the chain.
    double cov_w_occ(int c, int t, int t2, const OccCondition& cond) const {
        if (!cfg_.occupation) throw PreconditionError("no occupation layer configured");
        int lo = std::min(t, t2), hi = std::max(t, t2);
        double base = cov_eps(c, t, t2) + cov_kappa(t, t2);
        int occ_lo = -1, occ_hi = -1;
        bool pin_lo = cond.pinned(lo, &occ_lo), pin_hi = cond.pinned(hi, &occ_hi);
        const auto& oc = *cfg_.occupation;
        if (pin_lo && pin_hi)
            return skill_inner(c, occ_lo, occ_hi, lo, hi) + base;
        if (!pin_lo && pin_hi) {
            // marginalize the early occupation given the nearest pinned later year
            int n = oc.n_occ();
            double cov = base;
            int py = nearest_pin_after(cond, lo);
            int po = -1;
            cond.pinned(py, &po);
            Eigen::VectorXd pd = reverse_dist(c, lo, py, po);
            for (int d = 0; d < n; ++d)
                if (pd(d) > 0.0) cov += pd(d) * skill_inner(c, d, occ_hi, lo, hi);
            return cov;
        }
        throw PreconditionError("cov_w_occ requires the later year to be pinned");
    }

    /// E[w_t | c, occupation pins]; requires o_t pinned.
    double mean_w_occ(int t, const OccCondition& cond) const {
        if (!cfg_.occupation) throw PreconditionError("no occupation layer configured");
        int o = -1;
        if (!cond.pinned(t, &o)) throw PreconditionError("mean_w_occ requires o_t pinned");
        return cfg_.occupation->gamma[o](t);
    }

    /// Pooled cov over a group: observation-count-weighted average of
    /// per-cohort covariances (between-cohort mean terms are zero).
    double pooled_cov(const GroupSel& sel, int t, int t2,
                      const OccCondition* cond = nullptr) const {
        double num = 0.0, den = 0.0;
        for (int c : sel.resolve(cfg_, std::max(t, t2))) {
            if (c < cfg_.cohort_lo || c > cfg_.cohort_hi) continue;
            if (!cfg_.observed(c, t) || !cfg_.observed(c, t2)) continue;
            double w = cfg_.n_cohort(c);
            if (w <= 0.0) continue;
            num += w * (cond ? cov_w_occ(c, t, t2, *cond) : cov_w(c, t, t2));
            den += w;
        }
        if (den == 0.0) throw PreconditionError("group empty under config for years " +
                                                std::to_string(t) + "," + std::to_string(t2));
        return num / den;
    }

    /// Pooled var(mu_t * theta_t) over all cohorts observed in year t.
    double pooled_var_mu_theta(int t) const {
        double num = 0.0, den = 0.0;
        for (int c = cfg_.cohort_lo; c <= cfg_.cohort_hi; ++c) {
            if (!cfg_.observed(c, t)) continue;
            double w = cfg_.n_cohort(c);
            double v = cfg_.occupation ? cov_w(c, t, t) - cov_eps(c, t, t) - cov_kappa(t, t)
                                       : cfg_.mu(t) * cfg_.mu(t) * var_theta(c, t);
            num += w * v;
            den += w;
        }
        if (den == 0.0) throw PreconditionError("no cohorts observed in year " + std::to_string(t));
        return num / den;
    }

    Eigen::VectorXd marginal(int c, int t) const {
        int n = static_cast<int>(init_dist_.size());
        Eigen::VectorXd p0(n);
        for (int i = 0; i < n; ++i) p0(i) = init_dist_[i];
        int steps = t - (c + 1);
        return kernel_powers_.at(steps).transpose() * p0;
    }

private:
    struct CohortTables {
        std::vector<double> nu_prefix;    // sum var_nu over entry..t
        std::vector<double> lam_prefix;   // Lambda_t(c)
        std::vector<double> var_phi;      // FeAr1 skill AR component
        std::vector<double> var_phi_eps;  // AR component of eps
    };

    void build_cohort_tables(int c) {
        CohortTables tab;
        int first = c + 1;
        int len = cfg_.year_hi - first + 1;
        if (len <= 0) throw PreconditionError("cohort " + std::to_string(c) + " never observed");
        tab.nu_prefix.assign(len, 0.0);
        tab.lam_prefix.assign(len, 0.0);
        tab.var_phi.assign(len, 0.0);
        tab.var_phi_eps.assign(len, 0.0);
        double nu = 0.0, lam = 0.0, vphi = 0.0, vphie = 0.0;
        const auto* hip = std::get_if<HipSkills>(&cfg_.skills);
        const auto* ar = std::get_if<FeAr1Skills>(&cfg_.skills);
        const auto* rw = std::get_if<RandomWalkSkills>(&cfg_.skills);
        const auto* arma = std::get_if<Ar1PlusMaShocks>(&cfg_.shocks);
        for (int t = first; t <= cfg_.year_hi; ++t) {
            int i = t - first;
            if (rw) nu += rw->var_nu(t, c);
            if (hip) {
                nu += hip->var_nu(t, c);
                lam += hip->lambda(t, c);
            }
            if (ar) vphi = ar->rho(t) * ar->rho(t) * vphi + ar->var_nu(t, c);
            if (arma) vphie = arma->rho_eps * arma->rho_eps * vphie + arma->var_nu_eps(t, c);
            tab.nu_prefix[i] = nu;
            tab.lam_prefix[i] = lam;
            tab.var_phi[i] = vphi;
            tab.var_phi_eps[i] = vphie;
        }
        tables_[c] = std::move(tab);
    }

    int idx(int c, int t) const { return t - (c + 1); }

    void check_years(int c, int lo, int hi) const {
        if (lo < c + 1 || hi > cfg_.year_hi)
            throw PreconditionError("years (" + std::to_string(lo) + "," + std::to_string(hi) +
                                    ") outside observable range for cohort " + std::to_string(c));
    }

    /// sum_j sum_j2 mu~_{j,lo}^a mu~_{j2,hi}^b cov(theta_{j,lo}, theta_{j2,hi})
    double skill_inner(int c, int a, int b, int lo, int hi) const {
        const auto& oc = *cfg_.occupation;
        if (!oc.multi) return oc.mu_occ[a](lo) * oc.mu_occ[b](hi) * cov_theta(c, lo, hi);
        const auto& m = *oc.multi;
        const Eigen::MatrixXd& sig = sigma_by_year_.at(lo);
        double s = 0.0;
        for (int j = 0; j < m.n_skills; ++j)
            for (int j2 = 0; j2 < m.n_skills; ++j2)
                s += oc.mu_occ[a](lo) * m.alpha[a][j](lo) * oc.mu_occ[b](hi) * m.alpha[b][j2](hi) *
                     sig(j, j2);
        return s;
    }

    int nearest_pin_after(const OccCondition& cond, int year) const {
        int best = -1;
        for (auto& [y, o] : cond.pins) {
            (void)o;
            if (y > year && (best < 0 || y < best)) best = y;
        }
        if (best < 0) throw PreconditionError("no conditioning year after " + std::to_string(year));
        return best;
    }

    /// P(o_early = d | o_{pin_year} = pin_occ), Bayes on the forward chain.
    Eigen::VectorXd reverse_dist(int c, int early, int pin_year, int pin_occ) const {
        Eigen::VectorXd pe = marginal(c, early);
        const Eigen::MatrixXd& fwd = kernel_powers_.at(pin_year - early);
        Eigen::VectorXd num = pe.cwiseProduct(fwd.col(pin_occ));
        double den = num.sum();
        if (den <= 0.0) throw PreconditionError("conditioning event has probability zero");
        return num / den;
    }

    DgpConfig cfg_;
    int first_entry_ = 0;
    std::map<int, CohortTables> tables_;
    std::vector<double> init_dist_;
    std::vector<Eigen::MatrixXd> kernel_powers_;
    std::map<int, Eigen::MatrixXd> sigma_by_year_;
};

}  // namespace wagedyn
