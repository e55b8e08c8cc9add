#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "lab/errors.hpp"
#include "lab/model.hpp"
#include "lab/rng.hpp"

using namespace lab;
using namespace lab::geometry;
using namespace lab::model;

namespace {

ModelSpec spec_for(int n, int d, double lambda, double u0 = 0, int r0 = 1) {
	ModelSpec s;
	s.lattice = {n, d};
	s.coupling = lambda;
	s.interaction = Interaction::step(d, r0, u0);
	return s;
}

Eigen::VectorXd spectrum(const OperatorMatrix& H) {
	Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H.dense(), Eigen::EigenvaluesOnly);
	return es.eigenvalues();
}

} // namespace

TEST_CASE("sampling") {
	auto spec = spec_for(1, 1, 1.0);
	auto support = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 100000 - 1));
	auto f = sample_disorder(spec, support, 42);
	double sum = 0, sq = 0;
	for (double v : f.values) {
		REQUIRE(v >= 0);
		REQUIRE(v <= 1);
		sum += v;
		sq += v * v;
	}
	double N = f.values.size(), mean = sum / N;
	CHECK(std::abs(mean - 0.5) < 3 * std::sqrt(1.0 / 12 / N));
	auto g = sample_disorder(spec, support, 42);
	CHECK(g.values == f.values);
	auto h = sample_disorder(spec, support, 43);
	CHECK(h.values != f.values);
	auto zero = sample_disorder(spec_for(1, 1, 0.0), support, 42);
	for (double v : zero.values) REQUIRE(v == 0);

	// substreams depend only on (seed, site)
	auto sub = enumerate(make_box(Metric::Inf, {1, 1}, make_point({7}), 3));
	auto fs = sample_disorder(spec, sub, 42);
	for (std::size_t i = 0; i < sub.size(); ++i) CHECK(fs.values[i] == f.at(sub.site(i)));

	ModelSpec b = spec;
	b.law.kind = Density::Beta22;
	auto fb = sample_disorder(b, support, 1);
	double bs = 0, bq = 0;
	for (double v : fb.values) {
		bs += v;
		bq += v * v;
	}
	double bm = bs / N, bv = bq / N - bm * bm;
	CHECK(std::abs(bm - 0.5) < 3 * std::sqrt(0.05 / N));
	CHECK(bv == doctest::Approx(0.05).epsilon(0.02));
	CHECK(b.law.rho_inf() == 1.5);
}

TEST_CASE("assemble examples") {
	auto spec = spec_for(1, 1, 1.0);
	Region one = Region::from_sites({1, 1}, {{0}});
	DisorderField f = zero_field(one);
	f.values[0] = 0.7;
	auto H = assemble(one, f, spec);
	CHECK(H.dense()(0, 0) == doctest::Approx(2.7));

	auto path = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 2));
	auto H3 = assemble(path, zero_field(path), spec);
	auto ev = spectrum(H3);
	CHECK(ev[0] == doctest::Approx(2 - std::sqrt(2.0)));
	CHECK(ev[1] == doctest::Approx(2));
	CHECK(ev[2] == doctest::Approx(2 + std::sqrt(2.0)));

	auto spec2 = spec_for(2, 1, 1.0, 5.0, 1);
	Region pair = Region::from_sites({2, 1}, {{0, 0}});
	DisorderField f2 = zero_field(Region::from_sites({1, 1}, {{0}}));
	f2.values[0] = 1.0;
	CHECK(assemble(pair, f2, spec2).dense()(0, 0) == doctest::Approx(11));

	CHECK_THROWS_AS(assemble(path, zero_field(one), spec), PreconditionError);
}

TEST_CASE("norm bounds and enclosure") {
	auto b = operator_norm_bounds(spec_for(2, 1, 1.0));
	CHECK(b.first == 0);
	CHECK(b.second == 10);
	auto free1 = operator_norm_bounds(spec_for(1, 1, 0.0));
	CHECK(free1.second == 4);

	rng::Stream s(5);
	for (int t = 0; t < 50; ++t) {
		int n = 1 + t % 2, d = 1 + (t / 2) % 2;
		double lambda = 5 * s.uniform();
		auto spec = spec_for(n, d, lambda, 2 * s.uniform(), 1);
		double side = n == 2 && d == 2 ? 3 : 6;
		Point c(n * d, 0);
		c[0] = to_ticks(std::floor(4 * s.uniform()));
		auto region = enumerate(Box{Metric::Sym, {n, d}, c, to_ticks(side)});
		auto H = assemble(region, sample_for(spec, region, s.next()), spec);
		auto ev = spectrum(H);
		auto [lo, hi] = operator_norm_bounds(spec);
		auto [glo, ghi] = H.enclosure();
		REQUIRE(ev.minCoeff() >= lo - 1e-10);
		REQUIRE(ev.maxCoeff() <= hi + 1e-10);
		REQUIRE(ev.minCoeff() >= glo - 1e-10);
		REQUIRE(ev.maxCoeff() <= ghi + 1e-10);
	}
}

TEST_CASE("permutation covariance and restriction") {
	auto spec = spec_for(2, 1, 3.0, 1.5, 1);
	Box b = make_box(Metric::Inf, {2, 1}, make_point({0, 2}), 5);
	auto region = enumerate(b);
	std::vector<int> swapped;
	for (std::size_t i = 0; i < region.size(); ++i) {
		swapped.push_back(region.site(i)[1]);
		swapped.push_back(region.site(i)[0]);
	}
	auto pregion = Region::from_flat({2, 1}, swapped);
	auto field = sample_for(spec, set_union(region, pregion), 99);
	auto e1 = spectrum(assemble(region, field, spec));
	auto e2 = spectrum(assemble(pregion, field, spec));
	CHECK((e1 - e2).norm() < 1e-10);

	auto big = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 2}), 9));
	auto Hbig = assemble(big, sample_for(spec, big, 3), spec).dense();
	auto Hsmall = assemble(region, sample_for(spec, big, 3), spec).dense();
	for (std::size_t i = 0; i < region.size(); ++i)
		for (std::size_t j = 0; j < region.size(); ++j) {
			auto bi = *big.find(region.site(i)), bj = *big.find(region.site(j));
			REQUIRE(Hsmall(i, j) == Hbig(bi, bj));
		}
	auto again = assemble(region, sample_for(spec, big, 3), spec).dense();
	CHECK(again == Hsmall);
}

TEST_CASE("periodic variant") {
	auto spec = spec_for(1, 1, 0.0);
	auto ring = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 8)); // 9 sites
	auto ev = spectrum(assemble(ring, zero_field(ring), spec, Truncation::Periodic));
	std::vector<double> expect;
	for (int k = 0; k < 9; ++k) expect.push_back(2 - 2 * std::cos(2 * M_PI * k / 9));
	std::sort(expect.begin(), expect.end());
	for (int k = 0; k < 9; ++k) CHECK(ev[k] == doctest::Approx(expect[k]));
	auto tri = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 5}), 2));
	CHECK_THROWS_AS(assemble(tri, zero_field(particle_support(tri)), spec_for(2, 1, 0), Truncation::Periodic),
	                PreconditionError);
}

TEST_CASE("disorder dump round trip") {
	auto spec = spec_for(1, 2, 2.5);
	auto support = enumerate(make_box(Metric::Inf, {1, 2}, make_point({0, 0}), 4));
	auto f = sample_disorder(spec, support, 77);
	auto g = DisorderField::parse(f.dump());
	CHECK(g.seed == 77);
	CHECK(g.support == f.support);
	CHECK(g.values == f.values);
}

TEST_CASE("validation") {
	auto spec = spec_for(1, 1, 1.0);
	spec.interaction.table = {0.0, 1.0, 2.0};
	CHECK_THROWS_AS(spec.validate(), ConfigError);
	spec.interaction = Interaction::step(1, 1, -1);
	CHECK_THROWS_AS(spec.validate(), ConfigError);
	CHECK_THROWS_AS(parse_density("cauchy"), ConfigError);
	auto ok = spec_for(2, 1, 1.0, 1.0, 2);
	CHECK_NOTHROW(ok.validate());
	CHECK(ok.rho_inf() == 1.0);
}
