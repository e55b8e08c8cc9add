#include "lab/estimates.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"

namespace lab::estimates {

using geometry::Box;
using geometry::Metric;
using geometry::Rect;
using geometry::Region;
using spectral::cplx;

double wegner_constant(Metric kind, int n) {
	switch (kind) {
	case Metric::Inf: return n;
	case Metric::Sym: {
		double f = 1;
		for (int k = 2; k <= n; ++k) f *= k;
		return n * f;
	}
	case Metric::Haus: return std::pow(static_cast<double>(n), 2 * n + 1);
	}
	return 0;
}

Interval clopper_pearson(std::size_t hits, std::size_t trials, double level) {
	if (trials == 0) return {0, 1};
	double alpha = 1 - level;
	double k = static_cast<double>(hits), n = static_cast<double>(trials);
	Interval ci;
	ci.lo = hits == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1, alpha / 2);
	ci.hi = hits == trials ? 1.0 : boost::math::ibeta_inv(k + 1, n - k, 1 - alpha / 2);
	return ci;
}

EnsembleReport make_report(double eps, std::size_t hits, std::size_t trials, double bound) {
	EnsembleReport r;
	r.eps = eps;
	r.hits = hits;
	r.trials = trials;
	r.p_hat = trials ? static_cast<double>(hits) / trials : 0.0;
	r.ci = clopper_pearson(hits, trials);
	r.bound = bound;
	r.vacuous = bound >= 1;
	r.pass = r.ci.lo <= bound;
	return r;
}

nlohmann::json to_json(const EnsembleReport& r) {
	return {{"eps", r.eps},     {"trials", r.trials}, {"hits", r.hits},       {"p_hat", r.p_hat},
	        {"ci_lo", r.ci.lo}, {"ci_hi", r.ci.hi},   {"bound", r.bound},     {"vacuous", r.vacuous},
	        {"verdict", r.pass ? "PASS" : "FAIL"}};
}

WegnerRun fold_wegner(std::vector<TrialStat> trials, const std::vector<double>& eps_grid,
                      const std::vector<double>& bounds) {
	WegnerRun run;
	run.trials = std::move(trials);
	double prev = -1;
	for (std::size_t i = 0; i < eps_grid.size(); ++i) {
		std::size_t hits = 0;
		for (const auto& t : run.trials)
			if (t.statistic <= eps_grid[i]) ++hits;
		run.reports.push_back(make_report(eps_grid[i], hits, run.trials.size(), bounds[i]));
		if (i > 0 && eps_grid[i] >= eps_grid[i - 1] && run.reports[i].p_hat < prev) run.monotone = false;
		prev = run.reports[i].p_hat;
	}
	return run;
}

double wegner_bound(const Box& box, const model::ModelSpec& spec, double eps) {
	int nd = box.lat.dim();
	return 2 * wegner_constant(box.metric, box.lat.n) * spec.rho_inf() * eps * std::pow(box.side_length(), nd);
}

double wegner_pair_bound(const Rect& a, const Rect& b, const model::ModelSpec& spec, double eps) {
	std::int64_t L = 0;
	for (auto s : a.sides) L = std::max(L, s);
	for (auto s : b.sides) L = std::max(L, s);
	return 16 * spec.rho_inf() * eps * std::pow(geometry::from_ticks(L), 4 * a.lat.d);
}

double wegner_statistic(const Box& box, const model::ModelSpec& spec, double E, std::uint64_t seed) {
	Region region = geometry::enumerate(box);
	auto H = model::assemble(region, model::sample_for(spec, region, seed), spec);
	return spectral::dist_to_spectrum(spectral::eigenvalues(H), E);
}

WegnerRun wegner_single(const Box& box, const model::ModelSpec& spec, double E, const std::vector<double>& eps_grid,
                        std::size_t trials, std::uint64_t master, unsigned workers) {
	Region region = geometry::enumerate(box);
	if (region.size() > spectral::kDenseCeiling) throw CeilingError("Wegner box exceeds the dense ceiling");
	auto support = model::particle_support(region);
	std::vector<TrialStat> stats(trials);
	parallel_for(trials, workers, [&](std::size_t t) {
		std::uint64_t s = rng::trial_seed(master, t);
		auto H = model::assemble(region, model::sample_disorder(spec, support, s), spec);
		stats[t] = {t, s, spectral::dist_to_spectrum(spectral::eigenvalues(H), E)};
	});
	std::vector<double> bounds;
	for (double e : eps_grid) bounds.push_back(wegner_bound(box, spec, e));
	return fold_wegner(std::move(stats), eps_grid, bounds);
}

namespace {

void check_pair(const Rect& a, const Rect& b) {
	if (a.lat.n != 2 || b.lat.n != 2 || !(a.lat == b.lat)) throw PreconditionError("pair Wegner needs two-particle rectangles");
	if (geometry::separation_class(a, b) == geometry::Separation::Neither)
		throw PreconditionError("rectangles are not partially separated");
}

} // namespace

double wegner_pair_statistic(const Rect& a, const Rect& b, const model::ModelSpec& spec, std::uint64_t seed) {
	Region ra = geometry::enumerate(a), rb = geometry::enumerate(b);
	auto field = model::sample_disorder(spec, geometry::set_union(model::particle_support(ra), model::particle_support(rb)),
	                                    seed);
	auto ea = spectral::eigenvalues(model::assemble(ra, field, spec));
	auto eb = spectral::eigenvalues(model::assemble(rb, field, spec));
	return spectral::min_gap(ea, eb);
}

WegnerRun wegner_pair(const Rect& a, const Rect& b, const model::ModelSpec& spec, const std::vector<double>& eps_grid,
                      std::size_t trials, std::uint64_t master, unsigned workers) {
	check_pair(a, b);
	Region ra = geometry::enumerate(a), rb = geometry::enumerate(b);
	auto support = geometry::set_union(model::particle_support(ra), model::particle_support(rb));
	std::vector<TrialStat> stats(trials);
	parallel_for(trials, workers, [&](std::size_t t) {
		std::uint64_t s = rng::trial_seed(master, t);
		auto field = model::sample_disorder(spec, support, s);
		auto ea = spectral::eigenvalues(model::assemble(ra, field, spec));
		auto eb = spectral::eigenvalues(model::assemble(rb, field, spec));
		stats[t] = {t, s, spectral::min_gap(ea, eb)};
	});
	std::vector<double> bounds;
	for (double e : eps_grid) bounds.push_back(wegner_pair_bound(a, b, spec, e));
	return fold_wegner(std::move(stats), eps_grid, bounds);
}

IndependenceReport pair_independence(const Rect& a, const Rect& b, const model::ModelSpec& spec, double E, double eps,
                                     std::size_t trials, std::uint64_t master, unsigned workers) {
	check_pair(a, b);
	Region ra = geometry::enumerate(a), rb = geometry::enumerate(b);
	auto sa = model::particle_support(ra), sb = model::particle_support(rb);
	auto support = geometry::set_union(sa, sb);
	struct Row {
		bool A, B, coupled, product;
	};
	std::vector<Row> rows(trials);
	parallel_for(trials, workers, [&](std::size_t t) {
		std::uint64_t s = rng::trial_seed(master, t);
		auto field = model::sample_disorder(spec, support, s);
		auto ea = spectral::eigenvalues(model::assemble(ra, field, spec));
		auto eb = spectral::eigenvalues(model::assemble(rb, field, spec));
		auto other = model::sample_disorder(spec, sb, rng::derive(s, 1));
		auto eb2 = spectral::eigenvalues(model::assemble(rb, other, spec));
		rows[t] = {spectral::dist_to_spectrum(ea, E) <= eps, spectral::dist_to_spectrum(eb, E) <= eps,
		           spectral::min_gap(ea, eb) <= eps, spectral::min_gap(ea, eb2) <= eps};
	});
	IndependenceReport r;
	r.trials = trials;
	double N = static_cast<double>(trials);
	for (const auto& row : rows) {
		r.p_a += row.A;
		r.p_b += row.B;
		r.p_joint += row.A && row.B;
		r.p_coupled += row.coupled;
		r.p_product += row.product;
	}
	r.p_a /= N;
	r.p_b /= N;
	r.p_joint /= N;
	r.p_coupled /= N;
	r.p_product /= N;
	double va = r.p_a * (1 - r.p_a), vb = r.p_b * (1 - r.p_b);
	r.correlation = va > 0 && vb > 0 ? (r.p_joint - r.p_a * r.p_b) / std::sqrt(va * vb) : 0.0;
	double pool = 0.5 * (r.p_coupled + r.p_product);
	double se = std::sqrt(2 * pool * (1 - pool) / N);
	r.z_score = se > 0 ? (r.p_coupled - r.p_product) / se : 0.0;
	r.decorrelated = std::abs(r.correlation) <= 3 / std::sqrt(N);
	r.matches_product = std::abs(r.z_score) <= 3;
	return r;
}

double ct_bound(double eta, double eps, int D, double dist) {
	return 1.0 / (eta * (1 - eps)) * std::exp(-std::log(eps * eta / (2.0 * D) + 1) * dist);
}

CTReport combes_thomas_check(const Region& region, const model::DisorderField& field, const model::ModelSpec& spec,
                             cplx z, const std::vector<double>& eps_grid) {
	auto H = model::assemble(region, field, spec);
	auto ev = spectral::eigenvalues(H);
	CTReport r;
	r.eta = INFINITY;
	for (auto l : ev) r.eta = std::min(r.eta, std::abs(l - z));
	double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
	if (r.eta <= spectral::resonance_tolerance(scale)) throw PreconditionError("z lies on the spectrum");
	auto [lo, hi] = model::operator_norm_bounds(spec);
	double dx = std::max({lo - z.real(), z.real() - hi, 0.0});
	r.eta_window = std::hypot(dx, z.imag());

	Eigen::MatrixXcd G = spectral::resolvent(H, z);
	int D = region.lattice().dim();
	std::size_t N = region.size();
	for (std::size_t i = 0; i < N; ++i)
		for (std::size_t j = 0; j < N; ++j) {
			double g = std::abs(G(i, j));
			double dist = geometry::site_distance(Metric::Inf, region.lattice(), region.site(i), region.site(j));
			for (double e : eps_grid) {
				double ratio = g / ct_bound(r.eta, e, D, dist);
				if (ratio > r.max_ratio) {
					r.max_ratio = ratio;
					r.worst_eps = e;
					r.x = region.site_vec(i);
					r.y = region.site_vec(j);
				}
				if (r.eta_window > 0) r.max_ratio_window = std::max(r.max_ratio_window, g / ct_bound(r.eta_window, e, D, dist));
			}
			++r.pairs;
		}
	r.pass = r.max_ratio <= 1 + 1e-9;
	return r;
}

nlohmann::json to_json(const CTReport& r) {
	return {{"eta", r.eta},
	        {"eta_window", r.eta_window},
	        {"max_ratio", r.max_ratio},
	        {"max_ratio_window", r.max_ratio_window},
	        {"worst_eps", r.worst_eps},
	        {"x", r.x},
	        {"y", r.y},
	        {"pairs", r.pairs},
	        {"verdict", r.pass ? "PASS" : "FAIL"}};
}

double epsilon_term(double C, double rho, double eps, double a, double L, int nd) {
	return std::pow(2.0, 1.5) * C * rho * std::sqrt(eps / a) * std::pow(L, nd);
}

ProbLemmaReport probability_lemma_check(const Box& box, const model::ModelSpec& spec, const std::vector<std::size_t>& B1,
                                        const std::vector<std::size_t>& B2, const ProbLemmaParams& p, unsigned workers) {
	if (!(p.eps > 0)) throw PreconditionError("eps must be positive");
	if (!(p.enlarge > 1)) throw PreconditionError("enlargement factor must exceed 1");
	Region region = geometry::enumerate(box);
	for (auto i : B1)
		if (i >= region.size()) throw PreconditionError("B1 index outside the box");
	for (auto i : B2)
		if (i >= region.size()) throw PreconditionError("B2 index outside the box");
	for (auto i : geometry::inner_boundary_indices(region))
		if (std::find(B2.begin(), B2.end(), i) == B2.end()) throw PreconditionError("B2 must contain the inner boundary");

	Box big = box;
	big.side = std::llround(static_cast<double>(box.side) * p.enlarge);
	Region outer = geometry::enumerate(big);
	if (outer.size() > spectral::kDenseCeiling)
		throw CeilingError("enclosing box of " + std::to_string(outer.size()) + " sites exceeds the dense ceiling");
	auto bd = geometry::boundary_sets(region);
	if (!bd.plus.subset_of(outer)) throw PreconditionError("enclosing box too small");

	// k ranges over the outer boundary and B2, as indices into the enclosing box
	std::vector<std::size_t> K;
	for (std::size_t i = 0; i < bd.plus.size(); ++i) K.push_back(*outer.find(bd.plus.site(i)));
	for (auto i : B2) K.push_back(*outer.find(region.site(i)));
	std::sort(K.begin(), K.end());
	K.erase(std::unique(K.begin(), K.end()), K.end());
	std::vector<std::size_t> U;
	for (auto i : B1) U.push_back(*outer.find(region.site(i)));

	cplx z(p.E, p.eps);
	std::size_t pairs = B1.size() * B2.size();
	struct TrialOut {
		std::vector<double> gz, ge, gk;
	};
	std::vector<TrialOut> out(p.trials);
	auto support = model::particle_support(outer);
	parallel_for(p.trials, workers, [&](std::size_t t) {
		auto field = model::sample_disorder(spec, support, rng::trial_seed(p.seed, t));
		auto H = model::assemble(region, field, spec);
		auto Hb = model::assemble(outer, field, spec);
		TrialOut& o = out[t];
		Eigen::MatrixXcd A = H.dense().cast<cplx>();
		A.diagonal().array() -= z;
		Eigen::PartialPivLU<Eigen::MatrixXcd> luz(A);
		Eigen::MatrixXd R = H.dense();
		R.diagonal().array() -= p.E;
		auto ev = spectral::eigenvalues(H);
		bool on_spec = spectral::dist_to_spectrum(ev, p.E) <= spectral::resonance_tolerance(std::max(1.0, ev.cwiseAbs().maxCoeff()));
		Eigen::PartialPivLU<Eigen::MatrixXd> lue(R);
		Eigen::MatrixXcd Bz = Eigen::MatrixXcd::Zero(H.size(), B1.size());
		for (std::size_t j = 0; j < B1.size(); ++j) Bz(B1[j], j) = 1.0;
		Eigen::MatrixXcd Xz = luz.solve(Bz);
		Eigen::MatrixXd Xe = lue.solve(Bz.real());
		o.gz.reserve(pairs);
		o.ge.reserve(pairs);
		for (std::size_t j = 0; j < B1.size(); ++j)
			for (auto y : B2) {
				o.gz.push_back(std::abs(Xz(y, j)));
				o.ge.push_back(on_spec ? INFINITY : std::abs(Xe(y, j)));
			}
		Eigen::MatrixXcd Ab = Hb.dense().cast<cplx>();
		Ab.diagonal().array() -= z;
		Eigen::PartialPivLU<Eigen::MatrixXcd> lub(Ab);
		Eigen::MatrixXcd Bb = Eigen::MatrixXcd::Zero(Hb.size(), U.size());
		for (std::size_t j = 0; j < U.size(); ++j) Bb(U[j], j) = 1.0;
		Eigen::MatrixXcd Xb = lub.solve(Bb);
		for (std::size_t j = 0; j < U.size(); ++j)
			for (auto k : K) o.gk.push_back(std::abs(Xb(k, j)));
	});

	ProbLemmaReport rep;
	rep.enclosing_sites = outer.size();
	int nd = box.lat.dim();
	double L = box.side_length();
	double C = wegner_constant(box.metric, box.lat.n), rho = spec.rho_inf();
	rep.p0 = 2 * C * rho * std::pow(L, nd - p.gamma);

	double N = static_cast<double>(p.trials);
	std::size_t nk = K.size() * U.size();
	for (std::size_t c = 0; c < nk; ++c) {
		double s = 0;
		for (const auto& o : out) s += o.gk[c];
		rep.sup_mean = std::max(rep.sup_mean, s / N);
	}

	// |G - G_big|(k,u) <= |edges of the big box| * (1/eta) * CT(eta; b, u)
	auto [lo, hi] = model::operator_norm_bounds(spec);
	double dx = std::max({lo - p.E, p.E - hi, 0.0});
	double eta = std::hypot(dx, p.eps);
	auto bb = geometry::boundary_sets(outer);
	double ct = 0;
	for (std::size_t i = 0; i < bb.plus.size(); ++i)
		for (auto u : U) {
			double dist = geometry::site_distance(Metric::Inf, outer.lattice(), bb.plus.site(i), outer.site(u));
			ct = std::max(ct, ct_bound(eta, 0.5, nd, dist));
		}
	rep.slack = static_cast<double>(bb.edges.size()) / eta * ct;

	rep.pass = true;
	double mean = rep.sup_mean + rep.slack;
	for (double a : p.a_grid) {
		ProbLemmaRow row;
		row.a = a;
		std::size_t worst_z = 0, worst_e = 0;
		for (std::size_t c = 0; c < pairs; ++c) {
			std::size_t hz = 0, he = 0;
			for (const auto& o : out) {
				hz += a < o.gz[c];
				he += a < o.ge[c];
			}
			worst_z = std::max(worst_z, hz);
			worst_e = std::max(worst_e, he);
		}
		row.lhs_complex = worst_z / N;
		row.lhs_real = worst_e / N;
		row.ci_complex = clopper_pearson(worst_z, p.trials);
		row.ci_real = clopper_pearson(worst_e, p.trials);
		double scale = std::pow(L, p.gamma + 2 * nd) / a;
		row.rhs_complex = 4 * scale * mean + rep.p0;
		row.rhs_real = 8 * scale * mean + epsilon_term(C, rho, p.eps, a, L, nd) + rep.p0;
		row.pass = row.ci_complex.lo <= row.rhs_complex && row.ci_real.lo <= row.rhs_real;
		rep.pass = rep.pass && row.pass;
		rep.rows.push_back(row);
	}
	return rep;
}

nlohmann::json to_json(const ProbLemmaReport& r) {
	nlohmann::json rows = nlohmann::json::array();
	for (const auto& row : r.rows)
		rows.push_back({{"a", row.a},
		                {"lhs_complex", row.lhs_complex},
		                {"lhs_real", row.lhs_real},
		                {"ci_complex", {row.ci_complex.lo, row.ci_complex.hi}},
		                {"ci_real", {row.ci_real.lo, row.ci_real.hi}},
		                {"rhs_complex", row.rhs_complex},
		                {"rhs_real", row.rhs_real},
		                {"verdict", row.pass ? "PASS" : "FAIL"}});
	return {{"p0", r.p0},     {"sup_mean", r.sup_mean}, {"slack", r.slack}, {"enclosing_sites", r.enclosing_sites},
	        {"rows", rows}, {"verdict", r.pass ? "PASS" : "FAIL"}};
}

} // namespace lab::estimates
