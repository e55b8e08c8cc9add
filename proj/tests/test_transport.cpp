#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lab/errors.hpp"
#include "lab/rng.hpp"
#include "lab/transport.hpp"

using namespace lab;
using namespace lab::geometry;
using namespace lab::model;
using namespace lab::spectral;
using namespace lab::transport;

namespace {

ModelSpec spec_for(int n, int d, double lambda, double u0 = 0, int r0 = 1) {
	ModelSpec s;
	s.lattice = {n, d};
	s.coupling = lambda;
	s.interaction = Interaction::step(d, r0, u0);
	return s;
}

EnergyFilter all_of(const SpectralData& S) {
	return EnergyFilter::plateau_on(S.values.minCoeff() - 1, S.values.maxCoeff() + 1);
}

} // namespace

TEST_CASE("filter") {
	EnergyFilter f{0, 10, 1};
	CHECK(f(5) == 1);
	CHECK(f(0) == 0);
	CHECK(f(-3) == 0);
	CHECK(f(10) == 0);
	CHECK(f(0.5) == doctest::Approx(0.5));
	CHECK(f(9.5) == doctest::Approx(0.5));
	CHECK(f(1) == 1);
	for (double e = -1; e <= 11; e += 0.01) {
		REQUIRE(f(e) >= 0);
		REQUIRE(f(e) <= 1);
	}
	CHECK(smooth_step(0.3) + smooth_step(0.7) == doctest::Approx(1));
	EnergyFilter bad{0, 1, 0.6};
	CHECK_THROWS_AS(bad.validate(), ConfigError);
	auto p = EnergyFilter::plateau_on(0, 4);
	CHECK(p.delta == doctest::Approx(0.4));
	CHECK(p(0) == 1);
	CHECK(p(4) == 1);
}

TEST_CASE("amplitudes") {
	auto spec = spec_for(1, 1, 0.0);
	auto path = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 2));
	auto S = eig(assemble(path, zero_field(path), spec));
	auto g = all_of(S);
	auto a0 = amplitude(S, g, 1, 0);
	for (int u = 0; u < 3; ++u) CHECK(std::abs(a0[u] - (u == 1 ? 1.0 : 0.0)) < 1e-14);

	// path eigenpairs: psi_k(j) = sin(pi k j / 4)/sqrt(2), lambda_k = 2 - 2 cos(pi k / 4)
	auto a1 = amplitude(S, g, 1, 1.0);
	for (int u = 0; u < 3; ++u) {
		cplx expect = 0;
		for (int k = 1; k <= 3; ++k) {
			double lk = 2 - 2 * std::cos(M_PI * k / 4);
			expect += std::exp(cplx(0, -lk)) * std::sin(M_PI * k * (u + 1) / 4) * std::sin(M_PI * k * 2 / 4) / 2.0;
		}
		CHECK(std::abs(a1[u] - expect) < 1e-13);
	}

	rng::Stream s(2);
	auto sp = spec_for(1, 2, 3.0);
	auto box = enumerate(make_box(Metric::Inf, {1, 2}, make_point({0, 0}), 6));
	auto S2 = eig(assemble(box, sample_for(sp, box, 3), sp));
	EnergyFilter narrow{2, 6, 0.5};
	MomentEngine e(S2, narrow, 24, Eigen::VectorXd::Ones(S2.size()));
	for (double t : {0.0, 0.7, 3.0, 20.0}) {
		auto a = amplitude(S2, narrow, 24, t);
		CHECK(a.squaredNorm() == doctest::Approx(e.norm2()).epsilon(1e-12));
		CHECK(e.random(t) == doctest::Approx(e.norm2()).epsilon(1e-12));
	}
	CHECK_THROWS_AS(amplitude(S2, narrow, 5000, 0), PreconditionError);
}

TEST_CASE("free lattice against Bessel functions") {
	auto spec = spec_for(1, 1, 0.0);
	auto box = make_box(Metric::Inf, {1, 1}, make_point({0}), 200);
	auto region = enumerate(box);
	auto S = eig(assemble(region, zero_field(region), spec));
	auto g = EnergyFilter::plateau_on(0, 4);
	std::size_t y = *region.find(std::vector<int>{0});
	MomentEngine e(S, g, y, moment_weights(region, std::vector<int>{0}, Metric::Inf, 2));
	MomentEngine e0(S, g, y, moment_weights(region, std::vector<int>{0}, Metric::Inf, 0));
	for (double t : {1.0, 5.0, 10.0, 20.0}) {
		auto a = amplitude(S, g, y, t);
		for (int u = -30; u <= 30; u += 7) {
			double jb = std::cyl_bessel_j(std::abs(u), 2 * t);
			REQUIRE(std::abs(std::norm(a[*region.find(std::vector<int>{u})]) - jb * jb) < 1e-12);
		}
		CHECK(e.random(t) == doctest::Approx(1 + 2 * t * t).epsilon(1e-10));
		CHECK(e0.random(t) == doctest::Approx(1).epsilon(1e-12));
	}
	// time average of 1 + 2t^2 under (2/T)e^{-2t/T}
	CHECK(e.time_avg(4.0) == doctest::Approx(1 + 16.0).epsilon(1e-8));
}

TEST_CASE("moment properties") {
	rng::Stream s(5);
	for (int inst = 0; inst < 10; ++inst) {
		int n = 1 + inst % 2;
		auto sp = spec_for(n, 1, 4 * s.uniform(), 1.0);
		Point c(n, 0);
		if (n == 2) c[1] = to_ticks(3);
		auto box = Box{n == 2 ? Metric::Sym : Metric::Inf, {n, 1}, c, to_ticks(n == 2 ? 12 : 40)};
		auto region = enumerate(box);
		auto S = eig(assemble(region, sample_for(sp, region, s.next()), sp));
		EnergyFilter g{1, 5, 0.4};
		auto y = region.site_vec(region.size() / 2);
		std::size_t yi = region.size() / 2;
		auto kind = n == 2 ? Metric::Sym : Metric::Inf;
		MomentEngine base(S, g, yi, moment_weights(region, y, kind, 0));
		double prev_t = -1;
		for (double t : {0.0, 1.0, 10.0, 30.0, 100.0}) {
			double prev = -1;
			for (double p : {0.0, 0.5, 1.0, 2.0, 3.0}) {
				MomentEngine e(S, g, yi, moment_weights(region, y, kind, p));
				double m = e.random(t);
				REQUIRE(m >= prev * (1 - 1e-12));
				REQUIRE(m >= base.norm2() * (1 - 1e-12));
				if (t >= 10) REQUIRE(std::log(m) / std::log(japanese(t)) <= std::floor(p + n) + 2 + 0.1);
				prev = m;
			}
			REQUIRE(base.random(t) == doctest::Approx(base.norm2()).epsilon(1e-12));
			prev_t = t;
		}
		(void)prev_t;
	}
}

TEST_CASE("translation invariance on the torus") {
	auto spec = spec_for(1, 1, 0.0);
	auto ring = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 29));
	auto S = eig(assemble(ring, zero_field(ring), spec, Truncation::Periodic));
	auto g = EnergyFilter::plateau_on(0, 4);
	for (double t : {0.5, 3.0, 9.0}) {
		std::vector<double> ms;
		for (int a : {-14, -3, 0, 7, 14}) {
			std::vector<int> y{a};
			MomentEngine e(S, g, *ring.find(y), torus_weights(ring, y, Metric::Inf, 2));
			ms.push_back(e.random(t));
		}
		for (double m : ms) CHECK(std::abs(m - ms[0]) <= 1e-10 * ms[0]);
	}
	// disordered ring: shifting the field and the initial site together
	auto sp = spec_for(1, 1, 3.0);
	auto field = sample_for(sp, ring, 11);
	auto shifted = field;
	int W = 29;
	for (std::size_t i = 0; i < ring.size(); ++i) {
		int x = ring.site(i)[0];
		int src = ((x + 14 - 4) % W + W) % W - 14;
		shifted.values[i] = field.at(std::vector<int>{src});
	}
	auto S1 = eig(assemble(ring, field, sp, Truncation::Periodic));
	auto S2 = eig(assemble(ring, shifted, sp, Truncation::Periodic));
	auto g2 = EnergyFilter::plateau_on(0, 7);
	std::vector<int> y1{2}, y2{6};
	MomentEngine e1(S1, g2, *ring.find(y1), torus_weights(ring, y1, Metric::Inf, 2));
	MomentEngine e2(S2, g2, *ring.find(y2), torus_weights(ring, y2, Metric::Inf, 2));
	for (double t : {1.0, 4.0}) CHECK(std::abs(e1.random(t) - e2.random(t)) <= 1e-10 * e1.random(t));
}

TEST_CASE("time averages") {
	// single site: one eigenvalue, kernel 1
	auto spec = spec_for(1, 1, 1.0);
	Region one = Region::from_sites({1, 1}, {{0}});
	auto f = zero_field(one);
	f.values[0] = 0.5;
	auto S = eig(assemble(one, f, spec));
	EnergyFilter g{2.25, 4, 0.5}; // g(2.5) = 1/2
	MomentEngine e(S, g, 0, Eigen::VectorXd::Ones(1));
	for (double T : {0.1, 1.0, 50.0}) {
		auto r = moment_resolvent_identity_check(e, T);
		CHECK(r.closed == doctest::Approx(0.25));
		CHECK(r.residue == doctest::Approx(0.25));
		CHECK(r.quadrature == doctest::Approx(0.25).epsilon(1e-8));
	}

	rng::Stream s(6);
	for (int inst = 0; inst < 20; ++inst) {
		int n = 1 + inst % 2;
		auto sp = spec_for(n, 1, 5 * s.uniform(), 1.0);
		Point c(n, 0);
		if (n == 2) c[1] = to_ticks(2);
		auto box = Box{n == 2 ? Metric::Sym : Metric::Inf, {n, 1}, c, to_ticks(n == 2 ? 6 : 30)};
		auto region = enumerate(box);
		auto SS = eig(assemble(region, sample_for(sp, region, s.next()), sp));
		EnergyFilter gg{0.5, 6, 0.5};
		std::size_t yi = region.size() / 2;
		MomentEngine me(SS, gg, yi, moment_weights(region, region.site(yi), n == 2 ? Metric::Sym : Metric::Inf, 2));
		double T = 0.5 + 3 * s.uniform();
		auto r = moment_resolvent_identity_check(me, T);
		REQUIRE(r.residue_rel <= 1e-10);
		REQUIRE(std::abs(r.residue_imag) <= 1e-10 * r.closed);
		REQUIRE(r.quadrature_rel <= 1e-3);
		double tq = me.time_quadrature(T);
		REQUIRE(std::abs(tq - r.closed) <= 1e-6 * r.closed);
		REQUIRE(me.time_avg(1e-9) == doctest::Approx(me.random(0)).epsilon(1e-9));
	}
}

TEST_CASE("exponent fits") {
	std::vector<double> T, M;
	for (double t = 2; t <= 64.01; t *= std::sqrt(2.0)) {
		T.push_back(t);
		M.push_back(3 * std::pow(t, 2 * 0.7));
	}
	auto f = fit_transport_exponents(T, M, 2);
	CHECK(f.beta == doctest::Approx(0.7));
	CHECK(f.local_min == doctest::Approx(0.7));
	CHECK(f.in_range);
	CHECK_THROWS_AS(fit_transport_exponents({1, 2, 3}, {1, 2, 3}, 2), PreconditionError);
	CHECK_THROWS_AS(fit_transport_exponents({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}, 2), PreconditionError);

	// free lattice, time averaged, p = 2
	TransportSetup setup;
	setup.box = make_box(Metric::Inf, {1, 1}, make_point({0}), 400);
	setup.spec = spec_for(1, 1, 0.0);
	setup.filter = EnergyFilter::plateau_on(0, 4);
	setup.ys = {{0}};
	std::vector<double> grid;
	for (double t = 2; t <= 64.01; t *= std::sqrt(2.0)) grid.push_back(t);
	auto ms = moment_series(setup, grid, true, 1, 1);
	auto fit = fit_transport_exponents(grid, ms.sup_over_y(), 2);
	CHECK(fit.beta == doctest::Approx(1).epsilon(0.05));
	CHECK(ms.csv().rfind("kind,p,T_or_t,y,value,ci_lo,ci_hi,trial_count\n", 0) == 0);
}

TEST_CASE("series determinism and core sites") {
	TransportSetup setup;
	setup.box = make_box(Metric::Inf, {1, 1}, make_point({0}), 40);
	setup.spec = spec_for(1, 1, 5.0);
	setup.ys = core_sites(setup.box, Metric::Inf, 3);
	REQUIRE(setup.ys.size() == 3);
	for (const auto& y : setup.ys) CHECK(std::abs(y[0]) <= 10);
	std::vector<double> grid{1, 3, 10, 30};
	auto a = moment_series(setup, grid, true, 6, 9, 1);
	auto b = moment_series(setup, grid, true, 6, 9, 4);
	CHECK(a.csv() == b.csv());
	for (std::size_t k = 0; k < a.ys.size(); ++k)
		for (std::size_t i = 0; i < grid.size(); ++i) {
			CHECK(a.ci_lo[k][i] <= a.mean[k][i]);
			CHECK(a.mean[k][i] >= 0);
		}
}
