#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "lab/geometry.hpp"
#include "lab/model.hpp"
#include "lab/spectral.hpp"

namespace lab::estimates {

// C_n for infinity, symmetrized and Hausdorff boxes.
double wegner_constant(geometry::Metric kind, int n);

struct Interval {
	double lo = 0, hi = 1;
};

// Exact two-sided interval at the given confidence level.
Interval clopper_pearson(std::size_t hits, std::size_t trials, double level = 0.99);

struct EnsembleReport {
	double eps = 0;
	std::size_t trials = 0;
	std::size_t hits = 0;
	double p_hat = 0;
	Interval ci;
	double bound = 0;
	bool vacuous = false;
	bool pass = false; // ci.lo <= bound
};

EnsembleReport make_report(double eps, std::size_t hits, std::size_t trials, double bound);
nlohmann::json to_json(const EnsembleReport& r);

struct TrialStat {
	std::size_t trial = 0;
	std::uint64_t seed = 0;
	double statistic = 0;
};

struct WegnerRun {
	std::vector<TrialStat> trials;
	std::vector<EnsembleReport> reports; // one per eps, in grid order
	bool monotone = true;                // p_hat nondecreasing in eps
};

// Fold the per-trial statistic into reports for each eps (hit = statistic <= eps).
WegnerRun fold_wegner(std::vector<TrialStat> trials, const std::vector<double>& eps_grid,
                      const std::vector<double>& bounds);

double wegner_bound(const geometry::Box& box, const model::ModelSpec& spec, double eps);
double wegner_pair_bound(const geometry::Rect& a, const geometry::Rect& b, const model::ModelSpec& spec, double eps);

// Statistic: dist(sigma(H_box), E).
double wegner_statistic(const geometry::Box& box, const model::ModelSpec& spec, double E, std::uint64_t seed);
WegnerRun wegner_single(const geometry::Box& box, const model::ModelSpec& spec, double E,
                        const std::vector<double>& eps_grid, std::size_t trials, std::uint64_t master,
                        unsigned workers = 1);

// Statistic: min gap between sigma(H_a) and sigma(H_b) under one shared field.
double wegner_pair_statistic(const geometry::Rect& a, const geometry::Rect& b, const model::ModelSpec& spec,
                             std::uint64_t seed);
WegnerRun wegner_pair(const geometry::Rect& a, const geometry::Rect& b, const model::ModelSpec& spec,
                      const std::vector<double>& eps_grid, std::size_t trials, std::uint64_t master,
                      unsigned workers = 1);

struct IndependenceReport {
	std::size_t trials = 0;
	double p_a = 0, p_b = 0, p_joint = 0;
	double correlation = 0;  // of the indicators dist(sigma_a,E)<=eps, dist(sigma_b,E)<=eps
	double p_coupled = 0;    // gap <= eps with one shared field
	double p_product = 0;    // gap <= eps with independent fields
	double z_score = 0;      // two-proportion statistic for p_coupled vs p_product
	bool decorrelated = false; // |corr| <= 3/sqrt(N)
	bool matches_product = false;
};

IndependenceReport pair_independence(const geometry::Rect& a, const geometry::Rect& b, const model::ModelSpec& spec,
                                     double E, double eps, std::size_t trials, std::uint64_t master,
                                     unsigned workers = 1);

// (1/(eta(1-eps))) exp(-log(eps*eta/(2D)+1) * dist)
double ct_bound(double eta, double eps, int D, double dist);

struct CTReport {
	double eta = 0;        // dist(z, sigma(H_S))
	double eta_window = 0; // dist(z, [0, norm bound]), reported only
	double max_ratio = 0;
	double max_ratio_window = 0;
	double worst_eps = 0;
	geometry::Site x, y;
	std::size_t pairs = 0;
	bool pass = false; // max_ratio <= 1 + 1e-9
};

CTReport combes_thomas_check(const geometry::Region& region, const model::DisorderField& field,
                             const model::ModelSpec& spec, spectral::cplx z,
                             const std::vector<double>& eps_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
nlohmann::json to_json(const CTReport& r);

// 2^{3/2} C rho sqrt(eps/a) L^{nd}
double epsilon_term(double C, double rho, double eps, double a, double L, int nd);

struct ProbLemmaParams {
	double E = 0;
	double eps = 1e-6;
	double gamma = 2;
	std::vector<double> a_grid{1e-2, 1e-1, 1.0};
	double enlarge = 4;
	std::size_t trials = 200;
	std::uint64_t seed = 1;
};

struct ProbLemmaRow {
	double a = 0;
	double lhs_complex = 0; // max over pairs of P(a < |G_box(E+i eps; y,u)|)
	double lhs_real = 0;    // same at E
	Interval ci_complex, ci_real;
	double rhs_complex = 0;
	double rhs_real = 0;
	bool pass = false;
};

struct ProbLemmaReport {
	double p0 = 0;
	double sup_mean = 0;  // sup_u sup_k E|G(E+i eps;k,u)|, enclosing-box estimate
	double slack = 0;     // truncation slack added to sup_mean
	std::size_t enclosing_sites = 0;
	std::vector<ProbLemmaRow> rows;
	bool pass = false;
};

// B1, B2 are index sets into enumerate(box); B2 must contain the inner boundary.
ProbLemmaReport probability_lemma_check(const geometry::Box& box, const model::ModelSpec& spec,
                                        const std::vector<std::size_t>& B1, const std::vector<std::size_t>& B2,
                                        const ProbLemmaParams& p, unsigned workers = 1);
nlohmann::json to_json(const ProbLemmaReport& r);

} // namespace lab::estimates
