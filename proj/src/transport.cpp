#include "lab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"

namespace lab::transport {

using geometry::Metric;
using geometry::Region;
using spectral::cplx;

double smooth_step(double s) {
	if (s <= 0) return 0;
	if (s >= 1) return 1;
	double f = std::exp(-1 / s), g = std::exp(-1 / (1 - s));
	return f / (f + g);
}

EnergyFilter EnergyFilter::plateau_on(double lo, double hi) {
	if (!(hi > lo)) throw ConfigError("filter interval must have positive length");
	double delta = (hi - lo) / 10;
	return {lo - delta, hi + delta, delta};
}

void EnergyFilter::validate() const {
	if (!(delta > 0)) throw ConfigError("filter.delta must be > 0");
	if (a + delta > b - delta) throw ConfigError("filter plateau is empty: a + delta > b - delta");
}

double EnergyFilter::operator()(double E) const {
	if (E <= a || E >= b) return 0;
	if (E < a + delta) return smooth_step((E - a) / delta);
	if (E > b - delta) return smooth_step((b - E) / delta);
	return 1;
}

Eigen::VectorXd moment_weights(const Region& region, std::span<const int> y, Metric kind, double p) {
	Eigen::VectorXd w(region.size());
	for (std::size_t i = 0; i < region.size(); ++i)
		w[i] = std::pow(geometry::japanese(geometry::site_distance(kind, region.lattice(), y, region.site(i))), p);
	return w;
}

Eigen::VectorXd torus_weights(const Region& region, std::span<const int> y, Metric kind, double p) {
	if (kind == Metric::Haus) throw PreconditionError("torus weights support infinity and symmetrized kinds");
	const auto& lat = region.lattice();
	int n = lat.n, d = lat.d, dim = lat.dim();
	std::vector<int> lo(dim, std::numeric_limits<int>::max()), hi(dim, std::numeric_limits<int>::min());
	for (std::size_t i = 0; i < region.size(); ++i)
		for (int k = 0; k < dim; ++k) {
			lo[k] = std::min(lo[k], region.site(i)[k]);
			hi[k] = std::max(hi[k], region.site(i)[k]);
		}
	auto wrap = [&](int k, int a, int b) {
		int w = hi[k] - lo[k] + 1;
		int m = ((a - b) % w + w) % w;
		return std::min(m, w - m);
	};
	Eigen::VectorXd out(region.size());
	for (std::size_t i = 0; i < region.size(); ++i) {
		auto u = region.site(i);
		int best = std::numeric_limits<int>::max();
		const auto& perms = kind == Metric::Sym ? geometry::permutations(n) : geometry::permutations(1);
		for (const auto& pi : perms) {
			int m = 0;
			for (int q = 0; q < n; ++q) {
				int src = kind == Metric::Sym ? pi[q] : q;
				for (int k = 0; k < d; ++k) m = std::max(m, wrap(q * d + k, u[src * d + k], y[q * d + k]));
			}
			best = std::min(best, m);
		}
		out[i] = std::pow(geometry::japanese(best), p);
	}
	return out;
}

Eigen::VectorXcd amplitude(const spectral::SpectralData& S, const EnergyFilter& g, std::size_t y, double t) {
	if (y >= S.size()) throw PreconditionError("initial site outside the region");
	Eigen::VectorXcd c(S.size());
	for (std::size_t j = 0; j < S.size(); ++j)
		c[j] = std::exp(cplx(0, -t * S.values[j])) * g(S.values[j]) * S.vectors(y, j);
	return S.vectors.cast<cplx>() * c;
}

MomentEngine::MomentEngine(const spectral::SpectralData& S, const EnergyFilter& g, std::size_t y,
                           Eigen::VectorXd weights)
    : S_(S), w_(std::move(weights)) {
	if (y >= S.size()) throw PreconditionError("initial site outside the region");
	if (static_cast<std::size_t>(w_.size()) != S.size()) throw PreconditionError("weights do not match the region");
	c_.resize(S.size());
	for (std::size_t j = 0; j < S.size(); ++j) {
		c_[j] = g(S.values[j]) * S.vectors(y, j);
		if (c_[j] != 0) active_.push_back(static_cast<Eigen::Index>(j));
	}
}

double MomentEngine::norm2() const { return c_.squaredNorm(); }

double MomentEngine::random(double t) const {
	Eigen::VectorXcd a(active_.size());
	for (std::size_t k = 0; k < active_.size(); ++k) {
		auto j = active_[k];
		a[k] = std::exp(cplx(0, -t * S_.values[j])) * c_[j];
	}
	double m = 0;
	for (std::size_t v = 0; v < S_.size(); ++v) {
		cplx r = 0;
		for (std::size_t k = 0; k < active_.size(); ++k) r += S_.vectors(v, active_[k]) * a[k];
		m += w_[v] * std::norm(r);
	}
	return m;
}

const Eigen::MatrixXd& MomentEngine::pair_matrix() const {
	if (!A_) {
		Eigen::Index k = static_cast<Eigen::Index>(active_.size());
		Eigen::MatrixXd Va(S_.size(), k);
		Eigen::VectorXd ca(k);
		for (Eigen::Index i = 0; i < k; ++i) {
			Va.col(i) = S_.vectors.col(active_[i]);
			ca[i] = c_[active_[i]];
		}
		Eigen::MatrixXd W = Va.transpose() * w_.asDiagonal() * Va;
		A_ = ca.asDiagonal() * W * ca.asDiagonal();
	}
	return *A_;
}

double MomentEngine::time_avg(double T) const {
	if (!(T > 0)) throw PreconditionError("T must be > 0");
	const auto& A = pair_matrix();
	double s = 0;
	Eigen::Index k = A.rows();
	for (Eigen::Index i = 0; i < k; ++i)
		for (Eigen::Index j = 0; j < k; ++j) {
			double D = S_.values[active_[i]] - S_.values[active_[j]];
			s += A(i, j) * 4 / (4 + T * T * D * D);
		}
	return s;
}

cplx MomentEngine::residue(double T) const {
	if (!(T > 0)) throw PreconditionError("T must be > 0");
	const auto& A = pair_matrix();
	cplx s = 0;
	Eigen::Index k = A.rows();
	for (Eigen::Index i = 0; i < k; ++i)
		for (Eigen::Index j = 0; j < k; ++j) {
			double D = S_.values[active_[i]] - S_.values[active_[j]];
			s += A(i, j) * 2.0 / cplx(2, T * D);
		}
	return s;
}

double MomentEngine::energy_quadrature(double T, double tol) const {
	if (!(T > 0)) throw PreconditionError("T must be > 0");
	if (active_.empty()) return 0;
	double eta = 1 / T;
	std::size_t N = S_.size(), k = active_.size();
	Eigen::MatrixXd Va(N, k);
	Eigen::VectorXd ca(k), la(k);
	for (std::size_t i = 0; i < k; ++i) {
		Va.col(i) = S_.vectors.col(active_[i]);
		ca[i] = c_[active_[i]];
		la[i] = S_.values[active_[i]];
	}
	Eigen::MatrixXcd Vc = Va.cast<cplx>();
	auto F = [&](double E) {
		Eigen::VectorXcd q(k);
		for (std::size_t i = 0; i < k; ++i) q[i] = ca[i] / cplx(la[i] - E, -eta);
		Eigen::VectorXcd r = Vc * q;
		double s = 0;
		for (std::size_t v = 0; v < N; ++v) s += w_[v] * std::norm(r[v]);
		return s;
	};
	using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
	std::vector<double> cuts(la.data(), la.data() + k);
	for (std::size_t i = 0; i + 1 < k; ++i) cuts.push_back(0.5 * (la[i] + la[i + 1]));
	cuts.push_back(la.minCoeff() - 1);
	cuts.push_back(la.maxCoeff() + 1);
	std::sort(cuts.begin(), cuts.end());
	cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
	double total = GK::integrate(F, -std::numeric_limits<double>::infinity(), cuts.front(), 15, tol);
	total += GK::integrate(F, cuts.back(), std::numeric_limits<double>::infinity(), 15, tol);
	for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += GK::integrate(F, cuts[i], cuts[i + 1], 15, tol);
	return total / (M_PI * T);
}

double MomentEngine::time_quadrature(double T, double tol) const {
	if (!(T > 0)) throw PreconditionError("T must be > 0");
	if (active_.empty()) return 0;
	double lo = INFINITY, hi = -INFINITY;
	for (auto j : active_) {
		lo = std::min(lo, S_.values[j]);
		hi = std::max(hi, S_.values[j]);
	}
	double width = hi - lo;
	double h = width > 0 ? std::min(T, 2 * M_PI / (8 * width)) : T;
	double end = 40 * T;
	auto f = [&](double t) { return 2 / T * std::exp(-2 * t / T) * random(t); };
	using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
	double total = 0;
	for (double a = 0; a < end; a += h) total += GK::integrate(f, a, std::min(a + h, end), 10, tol);
	return total;
}

IdentityResiduals moment_resolvent_identity_check(const MomentEngine& engine, double T) {
	IdentityResiduals r;
	r.closed = engine.time_avg(T);
	cplx res = engine.residue(T);
	r.residue = res.real();
	r.residue_imag = res.imag();
	r.quadrature = engine.energy_quadrature(T, 1e-8);
	double scale = std::max(std::abs(r.closed), std::numeric_limits<double>::min());
	r.residue_rel = std::abs(res - r.closed) / scale;
	r.quadrature_rel = std::abs(r.quadrature - r.closed) / scale;
	return r;
}

FitResult fit_transport_exponents(const std::vector<double>& T, const std::vector<double>& M, double p) {
	std::size_t n = T.size();
	if (n != M.size() || n < 5) throw PreconditionError("degenerate grid: need at least 5 points");
	if (!(p > 0)) throw PreconditionError("degenerate grid: p must be > 0");
	for (std::size_t i = 0; i < n; ++i) {
		if (!(T[i] > 0) || !(M[i] > 0)) throw PreconditionError("degenerate grid: values must be positive");
		if (i > 0 && !(T[i] > T[i - 1])) throw PreconditionError("degenerate grid: T must increase");
	}
	if (std::log10(T.back() / T.front()) < 1.5 - 1e-9) throw PreconditionError("degenerate grid: span below 1.5 decades");

	FitResult f;
	f.window = std::min(n, std::max<std::size_t>(5, (n + 1) / 2));
	double sx = 0, sy = 0, sxx = 0, sxy = 0;
	for (std::size_t i = n - f.window; i < n; ++i) {
		double x = p * std::log(T[i]), y = std::log(M[i]);
		sx += x;
		sy += y;
		sxx += x * x;
		sxy += x * y;
	}
	double m = static_cast<double>(f.window);
	f.beta = (m * sxy - sx * sy) / (m * sxx - sx * sx);
	f.local_min = INFINITY;
	f.local_max = -INFINITY;
	for (std::size_t i = 0; i + 1 < n; ++i) {
		double s = (std::log(M[i + 1]) - std::log(M[i])) / (p * (std::log(T[i + 1]) - std::log(T[i])));
		f.local_min = std::min(f.local_min, s);
		f.local_max = std::max(f.local_max, s);
	}
	f.in_range = f.beta >= -0.05 && f.beta <= 1.05;
	return f;
}

nlohmann::json to_json(const FitResult& f) {
	return {{"beta_hat", f.beta},
	        {"local_slope_min", f.local_min},
	        {"local_slope_max", f.local_max},
	        {"window", f.window},
	        {"in_range", f.in_range},
	        {"note", "finite-volume, finite-T estimate"}};
}

std::vector<double> MomentSeries::sup_over_y() const {
	std::vector<double> s(grid.size(), 0.0);
	for (const auto& row : mean)
		for (std::size_t i = 0; i < grid.size(); ++i) s[i] = std::max(s[i], row[i]);
	return s;
}

std::string MomentSeries::csv() const {
	std::ostringstream os;
	os << "kind,p,T_or_t,y,value,ci_lo,ci_hi,trial_count\n";
	char buf[256];
	for (std::size_t k = 0; k < ys.size(); ++k) {
		std::string y;
		for (int c : ys[k]) y += (y.empty() ? "" : ";") + std::to_string(c);
		for (std::size_t i = 0; i < grid.size(); ++i) {
			std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%s,%.17g,%.17g,%.17g,%zu\n", kind.c_str(), p, grid[i],
			              y.c_str(), mean[k][i], ci_lo[k][i], ci_hi[k][i], trials);
			os << buf;
		}
	}
	return os.str();
}

MomentSeries moment_series(const TransportSetup& setup, const std::vector<double>& grid, bool time_avg,
                           std::size_t trials, std::uint64_t master, unsigned workers) {
	if (trials == 0) throw PreconditionError("need at least one trial");
	Region region = geometry::enumerate(setup.box);
	if (region.size() > spectral::kDenseCeiling) throw CeilingError("transport region exceeds the dense ceiling");
	EnergyFilter g;
	if (setup.filter) {
		g = *setup.filter;
	} else {
		auto [lo, hi] = model::operator_norm_bounds(setup.spec);
		g = EnergyFilter::plateau_on(lo, hi);
	}
	g.validate();
	std::vector<std::size_t> yidx;
	std::vector<Eigen::VectorXd> weights;
	for (const auto& y : setup.ys) {
		auto i = region.find(y);
		if (!i) throw PreconditionError("initial site outside the region");
		yidx.push_back(*i);
		weights.push_back(setup.trunc == model::Truncation::Periodic ? torus_weights(region, y, setup.kind, setup.p)
		                                                             : moment_weights(region, y, setup.kind, setup.p));
	}
	auto support = model::particle_support(region);
	// values[trial][y][grid]
	std::vector<std::vector<std::vector<double>>> values(trials);
	parallel_for(trials, workers, [&](std::size_t t) {
		auto field = model::sample_disorder(setup.spec, support, rng::trial_seed(master, t));
		auto H = model::assemble(region, field, setup.spec, setup.trunc);
		auto S = spectral::eig(H);
		auto& out = values[t];
		out.resize(yidx.size());
		for (std::size_t k = 0; k < yidx.size(); ++k) {
			MomentEngine e(S, g, yidx[k], weights[k]);
			for (double x : grid) out[k].push_back(time_avg ? e.time_avg(x) : e.random(x));
		}
	});

	MomentSeries ms;
	ms.kind = time_avg ? "time_avg" : "random";
	ms.p = setup.p;
	ms.grid = grid;
	ms.ys = setup.ys;
	ms.trials = trials;
	double N = static_cast<double>(trials);
	for (std::size_t k = 0; k < yidx.size(); ++k) {
		std::vector<double> mu, lo, hi;
		for (std::size_t i = 0; i < grid.size(); ++i) {
			double s = 0, q = 0;
			for (std::size_t t = 0; t < trials; ++t) s += values[t][k][i];
			double m = s / N;
			for (std::size_t t = 0; t < trials; ++t) q += (values[t][k][i] - m) * (values[t][k][i] - m);
			double half = trials > 1 ? 2.5758293035489 * std::sqrt(q / (N - 1) / N) : 0.0;
			mu.push_back(m);
			lo.push_back(m - half);
			hi.push_back(m + half);
		}
		ms.mean.push_back(mu);
		ms.ci_lo.push_back(lo);
		ms.ci_hi.push_back(hi);
	}
	return ms;
}

std::vector<geometry::Site> core_sites(const geometry::Box& box, Metric kind, std::size_t max_count) {
	Region region = geometry::enumerate(box);
	auto minus = geometry::inner_boundary_indices(region);
	double L = box.side_length();
	std::vector<std::size_t> core;
	for (std::size_t i = 0; i < region.size(); ++i) {
		int best = std::numeric_limits<int>::max();
		for (auto b : minus)
			best = std::min(best, geometry::site_distance(kind, region.lattice(), region.site(i), region.site(b)));
		if (4.0 * best >= L) core.push_back(i);
	}
	std::vector<geometry::Site> out;
	if (core.empty() || max_count == 0) return out;
	std::size_t count = std::min(max_count, core.size());
	for (std::size_t k = 0; k < count; ++k) {
		std::size_t pick = count == 1 ? core.size() / 2 : k * (core.size() - 1) / (count - 1);
		out.push_back(region.site_vec(core[pick]));
	}
	return out;
}

} // namespace lab::transport
