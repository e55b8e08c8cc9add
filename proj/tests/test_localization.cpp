#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lab/errors.hpp"
#include "lab/localization.hpp"
#include "lab/rng.hpp"

using namespace lab;
using namespace lab::geometry;
using namespace lab::model;
using namespace lab::spectral;
using namespace lab::localization;

namespace {

ModelSpec spec_for(int n, int d, double lambda, double u0 = 0, int r0 = 1) {
	ModelSpec s;
	s.lattice = {n, d};
	s.coupling = lambda;
	s.interaction = Interaction::step(d, r0, u0);
	return s;
}

SpectralData diagonal(int n) {
	SpectralData S;
	S.values = Eigen::VectorXd::LinSpaced(n, 0, n - 1);
	S.vectors = Eigen::MatrixXd::Identity(n, n);
	S.scale = n;
	return S;
}

} // namespace

TEST_CASE("correlator basics") {
	rng::Stream s(1);
	for (int inst = 0; inst < 100; ++inst) {
		int n = 1 + inst % 2;
		auto sp = spec_for(n, 1, 6 * s.uniform(), 1.0);
		Point c(n, 0);
		if (n == 2) c[1] = to_ticks(2);
		auto region = enumerate(Box{n == 2 ? Metric::Sym : Metric::Inf, {n, 1}, c, to_ticks(n == 2 ? 6 : 20)});
		auto S = eig(assemble(region, sample_for(sp, region, s.next()), sp));
		EnergyWindow all{S.values.minCoeff() - 1, S.values.maxCoeff() + 1};
		EnergyWindow I{1 + 3 * s.uniform(), 5 + 3 * s.uniform()};
		EnergyWindow inner{I.lo + 0.5, I.hi - 0.5};
		std::size_t x = s.next() % region.size(), y = s.next() % region.size();
		REQUIRE(correlator(S, all, x, x) == doctest::Approx(1).epsilon(1e-12));
		REQUIRE(correlator(S, {100, 101}, x, y) == 0);
		double q = correlator(S, I, x, y);
		REQUIRE(q == correlator(S, I, y, x));
		REQUIRE(correlator(S, inner, x, y) <= q + 1e-15);
		std::vector<double> one(S.size(), 1.0), alt(S.size()), ind(S.size());
		for (std::size_t j = 0; j < S.size(); ++j) {
			alt[j] = j % 2 ? -1.0 : 1.0;
			ind[j] = s.uniform() < 0.5 ? 1.0 : 0.0;
		}
		for (const auto& f : {one, alt, ind}) REQUIRE(functional_entry(S, I, f, x, y) <= q + 1e-10);
		// chi_I(H) entry by direct functional calculus
		Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S.size(), S.size());
		for (std::size_t j = 0; j < S.size(); ++j)
			if (I.contains(S.values[j])) P += S.vectors.col(j) * S.vectors.col(j).transpose();
		REQUIRE(std::abs(P(x, y)) <= q + 1e-10);
	}
}

TEST_CASE("Z and W weights") {
	auto D = diagonal(5);
	Region line = Region::from_sites({1, 1}, {{0}, {1}, {2}, {3}, {4}});
	for (std::size_t j = 0; j < 5; ++j) {
		auto r = zw_weights(D, line, j, j);
		CHECK(r.Z == doctest::Approx(1));
		CHECK(r.W == doctest::Approx(1));
	}

	SpectralData two;
	two.values = Eigen::Vector2d(0, 2);
	two.vectors.resize(2, 2);
	two.vectors << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), 1 / std::sqrt(2.0), -1 / std::sqrt(2.0);
	Region pair = Region::from_sites({1, 1}, {{0}, {1}});
	double nu = 1; // (nd+1)/2 with nd = 1
	double expect = (1 / std::sqrt(2.0)) / std::sqrt((1 + std::pow(2.0, -nu)) / 2);
	auto r = zw_weights(two, pair, 0, 0);
	CHECK(r.Z == doctest::Approx(expect));
	CHECK(r.W == doctest::Approx(expect));

	// free square: degenerate clusters, W may exceed Z
	auto sp = spec_for(1, 2, 0.0);
	auto sq = enumerate(make_box(Metric::Inf, {1, 2}, make_point({0, 0}), 6));
	auto S = eig(assemble(sq, zero_field(sq), sp));
	bool saw_cluster = false;
	for (std::size_t j = 0; j < S.size(); ++j)
		for (std::size_t a : {0ul, 10ul, 24ul}) {
			auto z = zw_weights(S, sq, j, a);
			REQUIRE(z.Z >= 0);
			REQUIRE(z.Z <= z.W * (1 + 1e-10));
			REQUIRE(z.W <= 1 + 1e-10);
			if (z.multiplicity > 1) saw_cluster = true;
		}
	CHECK(saw_cluster);
}

TEST_CASE("decay fits") {
	auto D = diagonal(8);
	std::vector<DistanceBin> bins;
	for (int d = 0; d < 8; ++d) bins.push_back({double(d), correlator(D, {-1, 100}, 0, d), 1});
	auto f = decay_fit(bins, 1.0);
	CHECK(std::isinf(f.slope));
	CHECK(f.slope < 0);

	std::vector<DistanceBin> exp_bins;
	for (int d = 0; d < 10; ++d) exp_bins.push_back({double(d), 2 * std::exp(-0.7 * d), 1});
	auto g = decay_fit(exp_bins, 1.0);
	CHECK(g.slope == doctest::Approx(-0.7));
	CHECK(g.r2 == doctest::Approx(1));
	CHECK(g.resolved);
	CHECK_THROWS_AS(decay_fit({exp_bins.begin(), exp_bins.begin() + 4}, 1.0), PreconditionError);
}

TEST_CASE("correlator ensembles") {
	CorrelatorSetup strong;
	strong.box = make_box(Metric::Inf, {1, 1}, make_point({0}), 60);
	strong.spec = spec_for(1, 1, 15.0);
	auto rs = correlator_ensemble(strong, 20, 3);
	CHECK(rs.fit.resolved);
	CHECK(rs.fit.slope < 0);
	CHECK(rs.fit.r2 >= 0.8);
	CHECK(rs.zw_records > 0);
	CHECK(rs.zw_violations == 0);

	CorrelatorSetup weak = strong;
	weak.box = make_box(Metric::Inf, {1, 1}, make_point({0}), 24);
	weak.spec = spec_for(1, 1, 0.1);
	auto rw = correlator_ensemble(weak, 10, 3);
	CHECK_FALSE(rw.fit.resolved);
	CHECK(rw.fit.note == "no decay resolved");

	auto again = correlator_ensemble(strong, 20, 3, 4);
	CHECK(again.csv() == rs.csv());
	CHECK(rs.csv().rfind("x,y,dist_S,mean_Q,ci_lo,ci_hi\n", 0) == 0);
}
