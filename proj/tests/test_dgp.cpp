#include <catch2/catch_amalgamated.hpp>

#include "wagedyn/dgp.hpp"
#include "wagedyn/population.hpp"

using namespace wagedyn;

namespace {

DgpConfig base_rw_config() {
    DgpConfig cfg;
    cfg.year_lo = 1970;
    cfg.year_hi = 1995;
    cfg.cohort_lo = 1965;
    cfg.cohort_hi = 1969;
    cfg.persons_per_cohort = 50;
    cfg.t_star = 1970;
    cfg.k = 2;
    RandomWalkSkills sk;
    sk.var_psi.value = 1.0;
    sk.var_nu.value = 0.1;
    cfg.skills = sk;
    MaShocks sh;
    sh.q = 0;
    sh.var_xi.value = 0.2;
    cfg.shocks = sh;
    return cfg;
}

}  // namespace

TEST_CASE("degenerate config produces exactly zero residuals") {
    DgpConfig cfg = base_rw_config();
    std::get<RandomWalkSkills>(cfg.skills).var_psi.value = 0.0;
    std::get<RandomWalkSkills>(cfg.skills).var_nu.value = 0.0;
    std::get<MaShocks>(cfg.shocks).var_xi.value = 0.0;
    auto [panel, latents] = simulate(cfg, 7);
    REQUIRE(!panel.empty());
    for (const auto& o : panel.rows) REQUIRE(o.log_wage == 0.0);
}

TEST_CASE("equal seeds give bit-identical panels") {
    DgpConfig cfg = base_rw_config();
    auto [p1, l1] = simulate(cfg, 42);
    auto [p2, l2] = simulate(cfg, 42);
    REQUIRE(p1.rows.size() == p2.rows.size());
    for (std::size_t i = 0; i < p1.rows.size(); ++i) {
        REQUIRE(p1.rows[i].log_wage == p2.rows[i].log_wage);
        REQUIRE(p1.rows[i].person_id == p2.rows[i].person_id);
    }
    auto [p3, l3] = simulate(cfg, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < p1.rows.size() && !any_diff; ++i)
        any_diff = p1.rows[i].log_wage != p3.rows[i].log_wage;
    REQUIRE(any_diff);
}

TEST_CASE("wage identity holds exactly for every variant") {
    SECTION("random walk with firm and test layers") {
        DgpConfig cfg = base_rw_config();
        cfg.firm = FirmLayer{0.3, YearSeries{0.8, {}}};
        cfg.test = TestLayer{0.9, 0.1};
        auto [panel, latents] = simulate(cfg, 11);
        REQUIRE(wage_identity_error(cfg, panel, latents) == 0.0);
    }
    SECTION("hip") {
        DgpConfig cfg = base_rw_config();
        HipSkills sk;
        sk.var_psi.value = 1.0;
        sk.var_delta.value = 0.04;
        sk.cov_psi_delta.value = 0.05;
        sk.lambda.value = 1.0;
        sk.var_nu.value = 0.01;
        cfg.skills = sk;
        auto [panel, latents] = simulate(cfg, 11);
        REQUIRE(wage_identity_error(cfg, panel, latents) == 0.0);
    }
    SECTION("fe-ar1 with arma shocks") {
        DgpConfig cfg = base_rw_config();
        FeAr1Skills sk;
        sk.var_psi.value = 1.0;
        sk.rho.value = 0.95;
        sk.var_nu.value = 0.02;
        cfg.skills = sk;
        Ar1PlusMaShocks sh;
        sh.rho_eps = 0.7;
        sh.var_nu_eps.value = 0.05;
        sh.ma.q = 1;
        sh.ma.beta = {1.0, 0.5};
        sh.ma.var_xi.value = 0.1;
        cfg.shocks = sh;
        auto [panel, latents] = simulate(cfg, 11);
        REQUIRE(wage_identity_error(cfg, panel, latents) == 0.0);
    }
    SECTION("occupations with two skills") {
        DgpConfig cfg = base_rw_config();
        OccupationLayer oc;
        oc.occupations = {"rout", "cog"};
        oc.gamma = {YearSeries{0.0, {}}, YearSeries{0.2, {}}};
        oc.mu_occ = {YearSeries{1.0, {}}, YearSeries{1.3, {}}};
        oc.transition = Eigen::MatrixXd(2, 2);
        oc.transition << 0.9, 0.1, 0.15, 0.85;
        MultiSkillBlock m;
        m.n_skills = 2;
        m.sigma0 = Eigen::MatrixXd(2, 2);
        m.sigma0 << 1.0, 0.3, 0.3, 0.8;
        m.sigma_step = Eigen::MatrixXd(2, 2);
        m.sigma_step << 0.02, 0.0, 0.0, 0.01;
        m.alpha = {{YearSeries{1.0, {}}, YearSeries{0.5, {}}},
                   {YearSeries{0.4, {}}, YearSeries{1.2, {}}}};
        oc.multi = m;
        cfg.occupation = oc;
        auto [panel, latents] = simulate(cfg, 11);
        REQUIRE(wage_identity_error(cfg, panel, latents) == 0.0);
    }
}

TEST_CASE("invalid configs are rejected with named fields") {
    DgpConfig cfg = base_rw_config();
    SECTION("negative variance") {
        std::get<RandomWalkSkills>(cfg.skills).var_psi.value = -0.5;
        REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("var_psi"));
    }
    SECTION("mu not positive") {
        cfg.mu.by_year[1980] = 0.0;
        REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("mu"));
    }
    SECTION("MA order above k-1") {
        MaShocks sh;
        sh.q = 5;
        sh.beta = {1, .1, .1, .1, .1, .1};
        cfg.shocks = sh;
        REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("q"));
    }
    SECTION("transition row sum") {
        OccupationLayer oc;
        oc.occupations = {"a", "b"};
        oc.gamma = {YearSeries{}, YearSeries{}};
        oc.mu_occ = {YearSeries{1.0, {}}, YearSeries{1.0, {}}};
        oc.transition = Eigen::MatrixXd(2, 2);
        oc.transition << 0.9, 0.2, 0.1, 0.9;
        cfg.occupation = oc;
        REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("transition"));
    }
    SECTION("cov_psi_delta bound") {
        HipSkills sk;
        sk.var_psi.value = 1.0;
        sk.var_delta.value = 0.01;
        sk.cov_psi_delta.value = 0.5;
        sk.lambda.value = 1.0;
        cfg.skills = sk;
        REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("cov_psi_delta"));
    }
}

TEST_CASE("sample variance converges to configured variance") {
    // pure permanent heterogeneity: var(w_t) = 1
    DgpConfig cfg;
    cfg.year_lo = 1990;
    cfg.year_hi = 1992;
    cfg.cohort_lo = 1985;
    cfg.cohort_hi = 1985;
    cfg.persons_per_cohort = 100000;
    cfg.t_star = 1990;
    cfg.k = 1;
    RandomWalkSkills sk;
    sk.var_psi.value = 1.0;
    cfg.skills = sk;
    cfg.shocks = MaShocks{};
    auto [panel, latents] = simulate(cfg, 5);
    double sum = 0.0, sumsq = 0.0;
    long n = 0;
    for (const auto& o : panel.rows)
        if (o.year == 1991) {
            sum += o.log_wage;
            sumsq += o.log_wage * o.log_wage;
            ++n;
        }
    double var = (sumsq - sum * sum / n) / (n - 1);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("population autocov matches hand accumulation for the random walk") {
    DgpConfig cfg = base_rw_config();
    std::get<MaShocks>(cfg.shocks).var_xi.value = 0.0;
    PopulationEvaluator pop(cfg);
    int c = 1967, t = 1990, t2 = 1982;
    double expected = 1.0 + 0.1 * (t2 - c);
    REQUIRE(pop.cov_w(c, t, t2) == Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(pop.pooled_cov(GroupSel::cohort(c), t, t2) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("MA(1) autocovariance is beta1*var_xi at lag one and zero beyond") {
    DgpConfig cfg = base_rw_config();
    std::get<RandomWalkSkills>(cfg.skills).var_psi.value = 0.0;
    std::get<RandomWalkSkills>(cfg.skills).var_nu.value = 0.0;
    MaShocks sh;
    sh.q = 1;
    sh.beta = {1.0, 0.5};
    sh.var_xi.value = 1.0;
    cfg.shocks = sh;
    PopulationEvaluator pop(cfg);
    int c = 1965, t = 1990;
    REQUIRE(pop.cov_w(c, t, t - 1) == Catch::Approx(0.5).epsilon(1e-12));
    REQUIRE(pop.cov_w(c, t, t - 2) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(pop.cov_w(c, t, t) == Catch::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("population autocov agrees with a large simulation within 3 MC SEs") {
    DgpConfig cfg;
    cfg.year_lo = 1991;
    cfg.year_hi = 1999;
    cfg.cohort_lo = 1990;
    cfg.cohort_hi = 1990;
    cfg.persons_per_cohort = 100000;
    cfg.t_star = 1991;
    cfg.k = 2;
    cfg.mu.value = 1.0;
    cfg.mu.by_year = {{1995, 0.9}, {1996, 0.85}, {1997, 0.8}, {1998, 0.8}, {1999, 0.8}};
    cfg.t_star = 1991;
    RandomWalkSkills sk;
    sk.var_psi.value = 0.8;
    sk.var_nu.value = 0.05;
    cfg.skills = sk;
    MaShocks sh;
    sh.q = 1;
    sh.beta = {1.0, 0.4};
    sh.var_xi.value = 0.1;
    cfg.shocks = sh;
    PopulationEvaluator pop(cfg);

    const int t = 1999, t2 = 1993;
    double pop_cov = pop.cov_w(1990, t, t2);

    // accumulate the sample covariance in chunks of fresh persons
    double sa = 0, sb = 0, sab = 0, sab2 = 0;
    long n = 0;
    for (int chunk = 0; chunk < 10; ++chunk) {
        auto [panel, latents] = simulate(cfg, 1000 + chunk);
        std::unordered_map<long, double> at_t, at_t2;
        for (const auto& o : panel.rows) {
            if (o.year == t) at_t[o.person_id] = o.log_wage;
            if (o.year == t2) at_t2[o.person_id] = o.log_wage;
        }
        for (auto& [pid, a] : at_t) {
            auto it = at_t2.find(pid);
            if (it == at_t2.end()) continue;
            double b = it->second;
            sa += a;
            sb += b;
            sab += a * b;
            sab2 += (a * b) * (a * b);
            ++n;
        }
    }
    REQUIRE(n == 1000000);
    double mean_ab = sab / n;
    double cov_hat = mean_ab - (sa / n) * (sb / n);
    double se = std::sqrt((sab2 / n - mean_ab * mean_ab) / n);
    REQUIRE(std::abs(cov_hat - pop_cov) < 3.0 * se);
}

TEST_CASE("process nesting: FeAr1(rho=1) and Hip(lambda=0) equal the random walk") {
    DgpConfig rw = base_rw_config();
    DgpConfig ar = rw;
    FeAr1Skills arsk;
    arsk.var_psi.value = 1.0;
    arsk.rho.value = 1.0;
    arsk.var_nu.value = 0.1;
    ar.skills = arsk;
    DgpConfig hip = rw;
    HipSkills hsk;
    hsk.var_psi.value = 1.0;
    hsk.var_delta.value = 0.04;  // inert when lambda == 0
    hsk.lambda.value = 0.0;
    hsk.var_nu.value = 0.1;
    hip.skills = hsk;

    PopulationEvaluator prw(rw), par(ar), php(hip);
    for (int c : {1965, 1968}) {
        for (int t = c + 1; t <= 1995; t += 3) {
            for (int t2 = c + 1; t2 <= t; t2 += 4) {
                double v = prw.cov_w(c, t, t2);
                REQUIRE(par.cov_w(c, t, t2) == Catch::Approx(v).epsilon(1e-12).margin(1e-12));
                REQUIRE(php.cov_w(c, t, t2) == Catch::Approx(v).epsilon(1e-12).margin(1e-12));
            }
        }
    }
}

TEST_CASE("multi-skill J=1 with unit intensity nests single-skill occupations") {
    DgpConfig base = base_rw_config();
    OccupationLayer oc;
    oc.occupations = {"a", "b"};
    oc.gamma = {YearSeries{0.05, {}}, YearSeries{-0.1, {}}};
    oc.mu_occ = {YearSeries{1.0, {}}, YearSeries{1.4, {}}};
    oc.transition = Eigen::MatrixXd(2, 2);
    oc.transition << 0.92, 0.08, 0.1, 0.9;

    DgpConfig single = base;
    single.occupation = oc;

    DgpConfig multi = base;
    OccupationLayer ocm = oc;
    MultiSkillBlock m;
    m.n_skills = 1;
    m.sigma0 = Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.1);  // var at earliest entry year
    m.sigma_step = Eigen::MatrixXd::Constant(1, 1, 0.1);
    m.alpha = {{YearSeries{1.0, {}}}, {YearSeries{1.0, {}}}};
    ocm.multi = m;
    multi.occupation = ocm;

    PopulationEvaluator ps(single), pm(multi);
    int c = single.cohort_lo;  // entry covariance anchors at the earliest cohort
    for (int t = c + 2; t <= 1995; t += 4)
        for (int t2 = c + 1; t2 <= t; t2 += 3)
            REQUIRE(pm.cov_w(c, t, t2) == Catch::Approx(ps.cov_w(c, t, t2)).epsilon(1e-12).margin(1e-12));

    OccCondition cond;
    cond.pins = {{1990, 1}, {1989, 1}, {1982, 0}};
    REQUIRE(pm.cov_w_occ(c, 1990, 1982, cond) ==
            Catch::Approx(ps.cov_w_occ(c, 1990, 1982, cond)).epsilon(1e-12).margin(1e-12));
}
