#include "lab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "lab/errors.hpp"

namespace lab::spectral {

using geometry::Box;
using geometry::Metric;
using geometry::Region;
using model::OperatorMatrix;

namespace {

constexpr std::size_t kExactSpectrum = 1500;

void check_ceiling(std::size_t n, std::size_t ceiling) {
	if (n > ceiling)
		throw CeilingError("region of " + std::to_string(n) + " sites exceeds the dense ceiling " + std::to_string(ceiling));
}

Eigen::MatrixXd dense_shifted(const OperatorMatrix& H, double E) {
	Eigen::MatrixXd A = H.dense();
	A.diagonal().array() -= E;
	return A;
}

// Solves (H - E) X = unit columns; returns the requested rows.
class RealSolver {
public:
	RealSolver(const OperatorMatrix& H, double E) {
		auto [lo, hi] = H.enclosure();
		(void)hi;
		spd_ = E < lo;
		n_ = H.size();
		if (n_ <= kDenseSolve) {
			Eigen::MatrixXd A = dense_shifted(H, E);
			if (spd_) dense_llt_.compute(A);
			else dense_lu_.compute(A);
		} else {
			Eigen::SparseMatrix<double> A = H.sparse;
			A.diagonal().array() -= E;
			if (spd_) {
				sparse_llt_.compute(A);
				if (sparse_llt_.info() != Eigen::Success) throw std::runtime_error("sparse Cholesky failed");
			} else {
				sparse_lu_.analyzePattern(A);
				sparse_lu_.factorize(A);
				if (sparse_lu_.info() != Eigen::Success) throw std::runtime_error("sparse LU failed: singular shift");
			}
		}
	}

	Eigen::MatrixXd solve_units(const std::vector<std::size_t>& cols) const {
		Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n_, cols.size());
		for (std::size_t j = 0; j < cols.size(); ++j) B(cols[j], j) = 1.0;
		if (n_ <= kDenseSolve) return spd_ ? Eigen::MatrixXd(dense_llt_.solve(B)) : Eigen::MatrixXd(dense_lu_.solve(B));
		return spd_ ? Eigen::MatrixXd(sparse_llt_.solve(B)) : Eigen::MatrixXd(sparse_lu_.solve(B));
	}

private:
	bool spd_ = false;
	std::size_t n_ = 0;
	Eigen::LLT<Eigen::MatrixXd> dense_llt_;
	Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;
	Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sparse_llt_;
	Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> sparse_lu_;
};

Eigen::MatrixXcd dense_shifted(const OperatorMatrix& H, cplx z) {
	Eigen::MatrixXcd A = H.dense().cast<cplx>();
	A.diagonal().array() -= z;
	return A;
}

void check_off_spectrum(const OperatorMatrix& H, cplx z) {
	auto [lo, hi] = H.enclosure();
	double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
	double tol = resonance_tolerance(scale);
	if (std::abs(z.imag()) > tol) return;
	if (z.real() < lo - tol || z.real() > hi + tol) return;
	if (dist_to_spectrum(eigenvalues(H), z.real()) <= tol) throw PreconditionError("z lies on the spectrum");
}

} // namespace

double resonance_tolerance(double scale) { return 1e-12 * std::max(1.0, scale); }

SpectralData eig(const OperatorMatrix& H, std::size_t ceiling) {
	check_ceiling(H.size(), ceiling);
	Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense());
	if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
	SpectralData S;
	S.values = es.eigenvalues();
	S.vectors = es.eigenvectors();
	S.scale = std::max(1.0, S.values.cwiseAbs().maxCoeff());
	return S;
}

Eigen::VectorXd eigenvalues(const OperatorMatrix& H, std::size_t ceiling) {
	check_ceiling(H.size(), ceiling);
	Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense(), Eigen::EigenvaluesOnly);
	if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
	return es.eigenvalues();
}

double dist_to_spectrum(const Eigen::VectorXd& sorted, double E) {
	if (sorted.size() == 0) return INFINITY;
	auto begin = sorted.data(), end = sorted.data() + sorted.size();
	auto it = std::lower_bound(begin, end, E);
	double d = INFINITY;
	if (it != end) d = *it - E;
	if (it != begin) d = std::min(d, E - *(it - 1));
	return d;
}

double min_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
	double best = INFINITY;
	Eigen::Index i = 0, j = 0;
	while (i < a.size() && j < b.size()) {
		best = std::min(best, std::abs(a[i] - b[j]));
		if (a[i] < b[j]) ++i;
		else ++j;
	}
	return best;
}

cplx green_entry(const OperatorMatrix& H, cplx z, std::size_t u, std::size_t v) {
	check_off_spectrum(H, z);
	Eigen::PartialPivLU<Eigen::MatrixXcd> lu(dense_shifted(H, z));
	Eigen::VectorXcd e = Eigen::VectorXcd::Zero(H.size());
	e[v] = 1.0;
	return lu.solve(e)[u];
}

cplx green_entry(const SpectralData& S, cplx z, std::size_t u, std::size_t v) {
	cplx g = 0;
	for (std::size_t j = 0; j < S.size(); ++j) g += S.vectors(u, j) * S.vectors(v, j) / (S.values[j] - z);
	return g;
}

Eigen::MatrixXcd green_matrix(const SpectralData& S, cplx z) {
	Eigen::VectorXcd w = (S.values.cast<cplx>().array() - z).inverse();
	Eigen::MatrixXcd V = S.vectors.cast<cplx>();
	return V * w.asDiagonal() * V.transpose();
}

Eigen::MatrixXcd resolvent(const OperatorMatrix& H, cplx z) {
	check_off_spectrum(H, z);
	Eigen::PartialPivLU<Eigen::MatrixXcd> lu(dense_shifted(H, z));
	return lu.solve(Eigen::MatrixXcd::Identity(H.size(), H.size()));
}

Eigen::MatrixXd green_block(const OperatorMatrix& H, double E, const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& cols) {
	check_off_spectrum(H, E);
	RealSolver solver(H, E);
	Eigen::MatrixXd X = solver.solve_units(cols);
	Eigen::MatrixXd out(rows.size(), cols.size());
	for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = X.row(rows[i]);
	return out;
}

void ClassificationParams::validate() const {
	if (!(theta > 0)) throw ConfigError("params.theta must be > 0");
	if (!(m > 0)) throw ConfigError("params.m must be > 0");
	if (!(zeta > 0 && zeta < 1)) throw ConfigError("params.zeta must lie in (0,1)");
	if (!(s > 0)) throw ConfigError("params.s must be > 0");
	if (!(beta > 0 && beta < 1)) throw ConfigError("params.beta must lie in (0,1)");
}

ResonanceMargins make_margins(double dist, bool exact, double ell, const ClassificationParams& p) {
	ResonanceMargins r;
	r.ell = ell;
	r.dist = dist;
	r.dist_exact = exact;
	r.suit_threshold = std::pow(ell, -p.s);
	r.res_threshold = 0.5 * std::exp(-std::pow(ell, p.beta));
	if (exact) {
		r.suitably_resonant = dist < r.suit_threshold;
		r.resonant = dist < r.res_threshold;
	} else {
		// dist is a lower bound: a flag is cleared only when the bound settles it
		r.suitably_resonant = !(dist >= r.suit_threshold);
		r.resonant = !(dist >= r.res_threshold);
		r.determined = !r.suitably_resonant && !r.resonant;
	}
	return r;
}

bool BoxVerdict::suitable_at(double theta) const {
	return !on_spectrum && determined && max_green <= std::pow(L, -theta);
}

bool BoxVerdict::regular_at(double m) const {
	return !on_spectrum && determined && max_green <= std::exp(-m * L / 2);
}

nlohmann::json to_json(const ResonanceMargins& m) {
	return {{"ell", m.ell},
	        {"dist", m.dist},
	        {"dist_exact", m.dist_exact},
	        {"suit_threshold", m.suit_threshold},
	        {"res_threshold", m.res_threshold},
	        {"suitably_resonant", m.suitably_resonant},
	        {"resonant", m.resonant},
	        {"determined", m.determined}};
}

nlohmann::json to_json(const BoxVerdict& v) {
	return {{"L", v.L},
	        {"E", v.E},
	        {"flags", {{"suitable", v.suitable}, {"regular", v.regular}, {"ses", v.ses}, {"on_spectrum", v.on_spectrum},
	                   {"determined", v.determined}}},
	        {"witnesses", {{"max_green", v.max_green}, {"u", v.u}, {"v", v.v}}},
	        {"thresholds", {{"suitable", v.suit_threshold}, {"regular", v.reg_threshold}, {"ses", v.ses_threshold}}},
	        {"margins", to_json(v.margins)},
	        {"cause", v.cause}};
}

nlohmann::json to_json(const ClassificationParams& p) {
	return {{"theta", p.theta}, {"m", p.m}, {"zeta", p.zeta}, {"s", p.s}, {"beta", p.beta}};
}

// ---- BoxAnalysis ----

BoxAnalysis::BoxAnalysis(const Box& box, const model::DisorderField& field, const model::ModelSpec& spec,
                         std::size_t dense_ceiling)
    : box_(box), ceiling_(dense_ceiling) {
	Region region = geometry::enumerate(box);
	H_ = model::assemble(region, field, spec);
	inner_ = geometry::inner_third_indices(box, H_.region);
	minus_ = geometry::inner_boundary_indices(H_.region);
	if (minus_.empty()) throw ConfigError("box has an empty inner boundary");
	enclosure_ = H_.enclosure();
}

bool BoxAnalysis::spectrum_available() const { return spectrum_.has_value() || H_.size() <= ceiling_; }

const Eigen::VectorXd& BoxAnalysis::spectrum() const {
	if (!spectrum_) spectrum_ = eigenvalues(H_, ceiling_);
	return *spectrum_;
}

DistanceBound BoxAnalysis::spectrum_distance(double E) const {
	if (spectrum_ || H_.size() <= kExactSpectrum) return {dist_to_spectrum(spectrum(), E), true};
	double lb = std::max({enclosure_.first - E, E - enclosure_.second, 0.0});
	return {lb, false};
}

BoxAnalysis::Peak BoxAnalysis::max_green(double E) const {
	Peak peak;
	peak.value = -1;
	RealSolver solver(H_, E);
	constexpr std::size_t chunk = 64;
	for (std::size_t start = 0; start < minus_.size(); start += chunk) {
		std::vector<std::size_t> cols(minus_.begin() + start, minus_.begin() + std::min(minus_.size(), start + chunk));
		Eigen::MatrixXd X = solver.solve_units(cols);
		for (std::size_t j = 0; j < cols.size(); ++j)
			for (std::size_t u : inner_) {
				double g = std::abs(X(u, j));
				if (g > peak.value) peak = {g, u, cols[j]};
			}
	}
	if (peak.value < 0) peak.value = 0;
	return peak;
}

BoxVerdict BoxAnalysis::verdict(double E, const ClassificationParams& p) const {
	BoxVerdict v;
	double L = box_.side_length();
	v.L = L;
	v.E = E;
	v.suit_threshold = std::pow(L, -p.theta);
	v.reg_threshold = std::exp(-p.m * L / 2);
	v.ses_threshold = std::exp(-std::pow(L, p.zeta));

	double scale = std::max({1.0, std::abs(enclosure_.first), std::abs(enclosure_.second)});
	double tol = resonance_tolerance(scale);
	DistanceBound db = spectrum_distance(E);
	double needed = std::max({std::pow(L, -p.s), 0.5 * std::exp(-std::pow(L, p.beta)), tol});
	if (!db.exact && db.value < needed && spectrum_available()) db = {dist_to_spectrum(spectrum(), E), true};
	v.margins = make_margins(db.value, db.exact, L, p);
	if (db.value <= tol) {
		if (db.exact) {
			v.on_spectrum = true;
			v.cause = "resonant";
		} else {
			v.determined = false;
			v.cause = "undetermined";
		}
		return v;
	}
	Peak peak = max_green(E);
	v.max_green = peak.value;
	v.u = H_.region.site_vec(peak.u);
	v.v = H_.region.site_vec(peak.v);
	v.suitable = peak.value <= v.suit_threshold;
	v.regular = peak.value <= v.reg_threshold;
	v.ses = peak.value <= v.ses_threshold;
	if (!v.suitable) v.cause = "nonsuitable";
	return v;
}

BoxVerdict classify_box(const Box& box, const model::DisorderField& field, const model::ModelSpec& spec, double E,
                        const ClassificationParams& p) {
	return BoxAnalysis(box, field, spec).verdict(E, p);
}

ResonanceMargins resonance_status(const geometry::Rect& rect, const model::DisorderField& field,
                                  const model::ModelSpec& spec, double E, const ClassificationParams& p) {
	Region region = geometry::enumerate(rect);
	auto H = model::assemble(region, field, spec);
	double ell = geometry::from_ticks(*std::min_element(rect.sides.begin(), rect.sides.end()));
	return make_margins(dist_to_spectrum(eigenvalues(H), E), true, ell, p);
}

ResonanceMargins resonance_status(const Box& box, const model::DisorderField& field, const model::ModelSpec& spec,
                                  double E, const ClassificationParams& p) {
	BoxAnalysis a(box, field, spec);
	auto db = a.spectrum_distance(E);
	if (!db.exact && a.spectrum_available()) db = {dist_to_spectrum(a.spectrum(), E), true};
	return make_margins(db.value, db.exact, box.side_length(), p);
}

// ---- non-interactive decomposition ----

DecompositionReport ni_decompose_check(const geometry::Rect& rect, const model::DisorderField& field,
                                       const model::ModelSpec& spec, double E) {
	if (rect.lat.n != 2 || !rect.symmetrized) throw PreconditionError("needs a symmetrized two-particle rectangle");
	int d = rect.lat.d;
	std::int64_t gap = 0;
	for (int k = 0; k < d; ++k) gap = std::max(gap, std::abs(rect.center[k] - rect.center[d + k]));
	std::int64_t Lmax = std::max(rect.sides[0], rect.sides[1]);
	if (!(gap > Lmax + geometry::kTicks * spec.interaction.r0))
		throw PreconditionError("hypothesis ||x1 - x2|| > L + r0 violated");

	Region region = geometry::enumerate(rect);
	auto H = model::assemble(region, field, spec);
	SpectralData S = eig(H);
	if (dist_to_spectrum(S.values, E) <= resonance_tolerance(S.scale)) throw PreconditionError("E lies on the spectrum");

	auto one = spec.one_particle();
	Box b1 = geometry::projection(rect, 0), b2 = geometry::projection(rect, 1);
	Region r1 = geometry::enumerate(b1), r2 = geometry::enumerate(b2);
	SpectralData S1 = eig(model::assemble(r1, field, one)), S2 = eig(model::assemble(r2, field, one));

	DecompositionReport rep;
	std::vector<double> sums;
	for (int copy = 0; copy < 2; ++copy)
		for (std::size_t j = 0; j < S1.size(); ++j)
			for (std::size_t k = 0; k < S2.size(); ++k) sums.push_back(S1.values[j] + S2.values[k]);
	std::sort(sums.begin(), sums.end());
	rep.values = sums.size();
	if (sums.size() != S.size()) {
		rep.multiset_error = INFINITY;
	} else {
		for (std::size_t i = 0; i < sums.size(); ++i)
			rep.multiset_error = std::max(rep.multiset_error, std::abs(sums[i] - S.values[i]));
	}

	Eigen::MatrixXd G = green_matrix(S, E).real();
	std::vector<std::size_t> plain, swapped;
	std::vector<std::pair<std::size_t, std::size_t>> coords;
	for (std::size_t i = 0; i < region.size(); ++i) {
		auto y = region.site(i);
		auto i1 = r1.find(y.subspan(0, d)), i2 = r2.find(y.subspan(d, d));
		if (i1 && i2) {
			plain.push_back(i);
			coords.emplace_back(*i1, *i2);
		} else {
			swapped.push_back(i);
		}
	}
	for (auto u : plain)
		for (auto v : swapped) rep.cross_max = std::max(rep.cross_max, std::abs(G(u, v)));

	// tensor resolvent on the plain component
	std::size_t n1 = S1.size(), n2 = S2.size(), m = plain.size();
	Eigen::MatrixXd K(m, n1 * n2);
	Eigen::VectorXd w(n1 * n2);
	for (std::size_t j = 0; j < n1; ++j)
		for (std::size_t k = 0; k < n2; ++k) w[j * n2 + k] = 1.0 / (S1.values[j] + S2.values[k] - E);
	for (std::size_t a = 0; a < m; ++a)
		for (std::size_t j = 0; j < n1; ++j)
			for (std::size_t k = 0; k < n2; ++k)
				K(a, j * n2 + k) = S1.vectors(coords[a].first, j) * S2.vectors(coords[a].second, k);
	Eigen::MatrixXd Gt = K * w.asDiagonal() * K.transpose();
	for (std::size_t a = 0; a < m; ++a)
		for (std::size_t b = 0; b < m; ++b)
			rep.tensor_error = std::max(rep.tensor_error, std::abs(Gt(a, b) - G(plain[a], plain[b])));
	return rep;
}

// ---- geometric resolvent identity ----

IdentityReport geometric_resolvent_check(const Region& inner, const Region& outer, const model::DisorderField& field,
                                         const model::ModelSpec& spec, cplx z, std::span<const int> u,
                                         std::span<const int> v) {
	auto bd = geometry::boundary_sets(inner, &outer);
	if (bd.edges.empty()) throw PreconditionError("inner region has no boundary inside the outer region");
	auto ui = inner.find(u);
	auto uo = outer.find(u);
	auto vo = outer.find(v);
	if (!ui) throw PreconditionError("u must lie in the inner region");
	if (!vo || inner.contains(v)) throw PreconditionError("v must lie in outer minus inner");

	auto H1 = model::assemble(inner, field, spec);
	auto H2 = model::assemble(outer, field, spec);
	check_off_spectrum(H1, z);
	check_off_spectrum(H2, z);
	Eigen::PartialPivLU<Eigen::MatrixXcd> lu1(dense_shifted(H1, z)), lu2(dense_shifted(H2, z));
	Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(H1.size()), e2 = Eigen::VectorXcd::Zero(H2.size());
	e1[*ui] = 1.0;
	e2[*vo] = 1.0;
	Eigen::VectorXcd g1 = lu1.solve(e1); // G1(a, u) = G1(u, a)
	Eigen::VectorXcd g2 = lu2.solve(e2); // G2(b, v)

	IdentityReport rep;
	rep.lhs = g2[*uo];
	rep.rhs = 0;
	double peak = 0;
	for (auto [a, b] : bd.edges) {
		std::size_t bo = *outer.find(bd.plus.site(b));
		cplx term = g1[a] * g2[bo];
		rep.rhs += term;
		peak = std::max(peak, std::abs(term));
	}
	rep.boundary_edges = bd.edges.size();
	rep.bound = static_cast<double>(bd.edges.size()) * peak;
	rep.residual = std::abs(rep.lhs - rep.rhs);
	rep.relative = rep.residual / std::max(std::abs(rep.lhs), std::numeric_limits<double>::min());
	return rep;
}

// ---- two-particle verdicts from one-particle verdicts ----

LiftReport two_particle_from_one_check(const Box& box, const model::DisorderField& field, const model::ModelSpec& spec,
                                       double E, double E1, double E2, LiftMode mode, double param) {
	if (box.lat.n != 2 || box.metric != Metric::Sym) throw PreconditionError("needs a symmetrized two-particle box");
	if (!(E <= E2 && E2 < E1)) throw PreconditionError("needs E <= E2 < E1");
	int d = box.lat.d;
	std::int64_t gap = 0;
	for (int k = 0; k < d; ++k) gap = std::max(gap, std::abs(box.center[k] - box.center[d + k]));
	if (!(gap > box.side + geometry::kTicks * spec.interaction.r0))
		throw PreconditionError("box is not separated: ||x1 - x2|| <= L + r0");

	double L = box.side_length();
	LiftReport rep;
	rep.param = param;
	if (mode == LiftMode::Regular) {
		rep.gate = param > 0 && param < std::log((E1 - E2) / (4.0 * d) + 1.0);
		rep.lifted = param - 6.0 * (d + 1) * std::log(2 * L) / L;
	} else {
		rep.gate = param > 2.0 * d + 2.0;
		rep.lifted = param / 2;
	}

	auto one = spec.one_particle();
	geometry::Lattice l1{1, d};
	Box b1{Metric::Inf, l1, geometry::Point(box.center.begin(), box.center.begin() + d), box.side};
	Box b2{Metric::Inf, l1, geometry::Point(box.center.begin() + d, box.center.end()), box.side};
	BoxAnalysis a1(b1, field, one), a2(b2, field, one);

	ClassificationParams p;
	if (mode == LiftMode::Regular) p.m = param;
	else p.theta = param;
	auto holds = [&](const BoxVerdict& v) { return mode == LiftMode::Regular ? v.regular : v.suitable; };

	rep.hypotheses = true;
	auto sweep = [&](const BoxAnalysis& target, const BoxAnalysis& other) {
		const auto& mus = other.spectrum();
		for (Eigen::Index j = 0; j < mus.size() && rep.hypotheses; ++j) {
			if (mus[j] > E1) break;
			++rep.shifts;
			if (!holds(target.verdict(E - mus[j], p))) rep.hypotheses = false;
		}
	};
	sweep(a1, a2);
	sweep(a2, a1);

	ClassificationParams q = p;
	if (mode == LiftMode::Regular) q.m = rep.lifted;
	else q.theta = rep.lifted;
	rep.two_particle = BoxAnalysis(box, field, spec).verdict(E, q);
	rep.conclusion = holds(rep.two_particle);
	rep.asserted = rep.gate && rep.hypotheses;
	rep.violation = rep.asserted && !rep.conclusion;
	return rep;
}

} // namespace lab::spectral
