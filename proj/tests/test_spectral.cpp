#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lab/errors.hpp"
#include "lab/rng.hpp"
#include "lab/spectral.hpp"
#include "oracles.hpp"

using namespace lab;
using namespace lab::geometry;
using namespace lab::model;
using namespace lab::spectral;

namespace {

ModelSpec spec_for(int n, int d, double lambda, double u0 = 0, int r0 = 1) {
	ModelSpec s;
	s.lattice = {n, d};
	s.coupling = lambda;
	s.interaction = Interaction::step(d, r0, u0);
	return s;
}

std::vector<double> as_double(std::span<const int> s) { return {s.begin(), s.end()}; }

// max |G(u,v)| over u in the inner third and v in the inner boundary, all by definition
double oracle_max_green(const Box& b, const Region& region, const Eigen::MatrixXd& Ginv) {
	int n = b.lat.n, d = b.lat.d;
	std::vector<double> c;
	for (auto t : b.center) c.push_back(t / 6.0);
	auto cc = oracle::split(c, n, d);
	double L = b.side_length(), best = 0;
	for (std::size_t u = 0; u < region.size(); ++u) {
		auto cu = oracle::split(as_double(region.site(u)), n, d);
		double du = b.metric == Metric::Sym ? oracle::dist_sym(cu, cc) : oracle::dist_inf(cu, cc);
		if (du > L / 6 + 1e-12) continue;
		for (std::size_t v = 0; v < region.size(); ++v) {
			auto y = region.site_vec(v);
			bool edge = false;
			for (std::size_t k = 0; k < y.size() && !edge; ++k)
				for (int s : {-1, 1}) {
					auto z = y;
					z[k] += s;
					if (!region.contains(z)) edge = true;
				}
			if (edge) best = std::max(best, std::abs(Ginv(u, v)));
		}
	}
	return best;
}

} // namespace

TEST_CASE("eig examples") {
	auto spec = spec_for(1, 1, 0.0);
	auto path = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 2));
	auto S = eig(assemble(path, zero_field(path), spec));
	CHECK(S.values[0] == doctest::Approx(2 - std::sqrt(2.0)));
	CHECK(S.values[1] == doctest::Approx(2));
	CHECK(S.values[2] == doctest::Approx(2 + std::sqrt(2.0)));

	Region one = Region::from_sites({1, 1}, {{0}});
	auto f = zero_field(one);
	f.values[0] = 0.7;
	auto H1 = assemble(one, f, spec);
	CHECK(eig(H1).values[0] == doctest::Approx(2.7));
	CHECK(std::abs(green_entry(H1, 0.0, 0, 0) - 1 / 2.7) < 1e-15);
	CHECK_THROWS_AS(green_entry(H1, 2.7, 0, 0), PreconditionError);

	auto big = enumerate(make_box(Metric::Inf, {1, 2}, make_point({0, 0}), 9));
	CHECK_THROWS_AS(eig(assemble(big, zero_field(big), spec_for(1, 2, 0.0)), 50), CeilingError);
}

TEST_CASE("eigenpair residuals") {
	rng::Stream s(3);
	for (int t = 0; t < 10; ++t) {
		auto spec = spec_for(2, 1, 4 * s.uniform(), 2 * s.uniform());
		auto region = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 3}), 8));
		auto H = assemble(region, sample_for(spec, region, s.next()), spec);
		auto S = eig(H);
		Eigen::MatrixXd D = H.dense();
		double norm = D.cwiseAbs().rowwise().sum().maxCoeff();
		REQUIRE((D * S.vectors - S.vectors * S.values.asDiagonal()).colwise().norm().maxCoeff() <= 1e-10 * norm);
		REQUIRE((S.vectors.transpose() * S.vectors - Eigen::MatrixXd::Identity(S.size(), S.size())).cwiseAbs().maxCoeff() <=
		        1e-10);
	}
}

TEST_CASE("green entries") {
	rng::Stream s(11);
	for (int t = 0; t < 100; ++t) {
		int n = 1 + t % 2;
		auto spec = spec_for(n, 1, 5 * s.uniform(), s.uniform());
		auto region = enumerate(make_box(Metric::Sym, {n, 1}, make_point(std::vector<double>(n, 0.0)), n == 1 ? 12 : 6));
		auto H = assemble(region, sample_for(spec, region, s.next()), spec);
		auto S = eig(H);
		cplx z(S.values.minCoeff() - 1 + 12 * s.uniform(), t % 3 == 0 ? 0.0 : 0.3 * s.uniform());
		double dist = INFINITY;
		for (auto l : S.values) dist = std::min(dist, std::abs(l - z));
		std::size_t u = s.next() % H.size(), v = s.next() % H.size();
		cplx g = green_entry(H, z, u, v);
		REQUIRE(std::abs(g) <= 1 / dist * (1 + 1e-12));
		if (t < 50) {
			cplx ge = green_entry(S, z, u, v);
			double scale = 1 / dist;
			REQUIRE(std::abs(g - ge) <= 1e-9 * std::max(std::abs(g), 1e-6 * scale));
		}
		REQUIRE(std::abs(g - green_entry(H, z, v, u)) <= 1e-12 * std::max(1.0, std::abs(g)));
	}
}

TEST_CASE("green block backends") {
	auto spec = spec_for(1, 2, 3.0);
	auto region = enumerate(make_box(Metric::Inf, {1, 2}, make_point({0, 0}), 24)); // 625 sites, sparse path
	auto field = sample_for(spec, region, 5);
	auto H = assemble(region, field, spec);
	Eigen::MatrixXd dense = H.dense();
	for (double E : {-1.0, 3.1}) {
		Eigen::MatrixXd A = dense;
		A.diagonal().array() -= E;
		Eigen::MatrixXd inv = A.inverse();
		std::vector<std::size_t> rows{0, 17, 300}, cols{5, 312, 624};
		auto G = green_block(H, E, rows, cols);
		for (std::size_t i = 0; i < rows.size(); ++i)
			for (std::size_t j = 0; j < cols.size(); ++j)
				CHECK(G(i, j) == doctest::Approx(inv(rows[i], cols[j])).epsilon(1e-8));
	}
}

TEST_CASE("resonance margins") {
	ClassificationParams p;
	p.s = 1;
	auto m = make_margins(0.5, true, 4, p);
	CHECK(m.suit_threshold == 0.25);
	CHECK_FALSE(m.suitably_resonant);
	auto z = make_margins(0.0, true, 4, p);
	CHECK(z.suitably_resonant);
	CHECK(z.resonant);
	p.beta = 0.5;
	auto t = make_margins(1.0, true, 9, p);
	CHECK(t.res_threshold == doctest::Approx(0.02489).epsilon(1e-3));
	auto lb = make_margins(0.01, false, 9, p);
	CHECK_FALSE(lb.determined);
	CHECK(make_margins(1.0, false, 9, p).determined);

	auto spec = spec_for(2, 1, 0.0);
	Rect r{{2, 1}, make_point({0, 10}), {to_ticks(2), to_ticks(2)}, true};
	auto f = zero_field(projection_region(r));
	auto st = resonance_status(r, f, spec, 4.0, p); // 2 + 2 is an eigenvalue
	CHECK(st.dist < 1e-12);
	CHECK(st.resonant);
}

TEST_CASE("classify box") {
	auto spec = spec_for(1, 1, 2.0);
	auto b = make_box(Metric::Inf, {1, 1}, make_point({0}), 12);
	auto field = sample_for(spec, enumerate(b), 21);
	ClassificationParams p;
	p.theta = 2;
	auto v = classify_box(b, field, spec, -10, p);
	CHECK(v.suitable);
	CHECK(v.regular);
	CHECK(v.max_green <= v.suit_threshold);
	CHECK(v.suit_threshold == doctest::Approx(1.0 / 144));

	BoxAnalysis a(b, field, spec);
	double ev = a.spectrum()[4];
	auto r = a.verdict(ev, p);
	CHECK(r.on_spectrum);
	CHECK(r.cause == "resonant");
	CHECK_FALSE(r.suitable);
	CHECK_FALSE(r.regular);
	CHECK_FALSE(r.ses);

	auto j1 = to_json(a.verdict(0.3, p)).dump(), j2 = to_json(classify_box(b, field, spec, 0.3, p)).dump();
	CHECK(j1 == j2);

	rng::Stream s(8);
	for (int t = 0; t < 40; ++t) {
		int n = 1 + t % 2;
		auto sp = spec_for(n, 1, 6 * s.uniform(), s.uniform());
		Point c(n, 0);
		if (n == 2) c[1] = to_ticks(1 + (t % 4));
		auto box = Box{n == 2 ? Metric::Sym : Metric::Inf, {n, 1}, c, to_ticks(n == 2 ? 6 + t % 3 : 9 + t % 4)};
		auto fld = sample_for(sp, enumerate(box), s.next());
		BoxAnalysis an(box, fld, sp);
		double E = -1 + 8 * s.uniform();
		if (dist_to_spectrum(an.spectrum(), E) < 1e-6) continue;
		Eigen::MatrixXd A = an.matrix().dense();
		A.diagonal().array() -= E;
		double expect = oracle_max_green(box, an.region(), A.inverse());
		ClassificationParams q;
		auto vd = an.verdict(E, q);
		REQUIRE(vd.max_green == doctest::Approx(expect).epsilon(1e-9));
		auto u = *an.region().find(vd.u), w = *an.region().find(vd.v);
		REQUIRE(std::abs(std::abs(A.inverse()(u, w)) - vd.max_green) <= 1e-9 * vd.max_green);
		for (double th : {0.5, 1.0, 2.0, 3.0})
			if (vd.suitable_at(th)) REQUIRE(vd.suitable_at(th / 2));
		REQUIRE(vd.suitable == vd.suitable_at(q.theta));
	}
}

TEST_CASE("non-interactive decomposition") {
	auto spec = spec_for(2, 1, 0.0);
	Rect r{{2, 1}, make_point({0, 10}), {to_ticks(2), to_ticks(2)}, true};
	auto f = zero_field(projection_region(r));
	auto rep = ni_decompose_check(r, f, spec, -1.0);
	CHECK(rep.values == 18);
	CHECK(rep.multiset_error <= 1e-9);
	CHECK(rep.cross_max <= 1e-12);
	CHECK(rep.tensor_error <= 1e-12);

	// sum-set oracle for the free path
	std::vector<double> one{2 - std::sqrt(2.0), 2, 2 + std::sqrt(2.0)}, sums;
	for (double a : one)
		for (double b : one) sums.push_back(a + b);
	std::sort(sums.begin(), sums.end());
	auto S = eig(assemble(enumerate(r), f, spec));
	for (int i = 0; i < 9; ++i) {
		CHECK(S.values[2 * i] == doctest::Approx(sums[i]));
		CHECK(S.values[2 * i + 1] == doctest::Approx(sums[i]));
	}

	rng::Stream s(4);
	for (int t = 0; t < 10; ++t) {
		auto sp = spec_for(2, 1, 5 * s.uniform(), 3.0);
		Rect q{{2, 1}, make_point({0, 9.0 + t % 3}), {to_ticks(4 + t % 3), to_ticks(3 + t % 2)}, true};
		auto fq = sample_for(sp, enumerate(q), s.next());
		auto rq = ni_decompose_check(q, fq, sp, -0.5);
		REQUIRE(rq.multiset_error <= 1e-9);
		REQUIRE(rq.cross_max <= 1e-12);
		REQUIRE(rq.tensor_error <= 1e-10);
	}
	Rect close{{2, 1}, make_point({0, 3}), {to_ticks(2), to_ticks(2)}, true};
	CHECK_THROWS_AS(ni_decompose_check(close, zero_field(projection_region(close)), spec, -1), PreconditionError);
}

TEST_CASE("geometric resolvent identity") {
	rng::Stream s(17);
	int checked = 0;
	for (int t = 0; t < 100; ++t) {
		auto sp = spec_for(2, 1, 4 * s.uniform(), 2 * s.uniform());
		Point c = make_point({0, static_cast<double>(t % 5)});
		auto outer_box = Box{Metric::Sym, {2, 1}, c, to_ticks(10)};
		Point ci = c;
		ci[0] += to_ticks(static_cast<double>(t % 3) - 1);
		auto inner_box = Box{Metric::Sym, {2, 1}, ci, to_ticks(4 + t % 3)};
		auto outer = enumerate(outer_box);
		auto inner = set_intersection(enumerate(inner_box), outer);
		auto rest = set_difference(outer, inner);
		auto field = sample_for(sp, outer, s.next());
		cplx z(-1 + 10 * s.uniform(), t % 2 ? 0.0 : 0.2);
		auto u = inner.site_vec(s.next() % inner.size());
		auto v = rest.site_vec(s.next() % rest.size());
		try {
			auto rep = geometric_resolvent_check(inner, outer, field, sp, z, u, v);
			REQUIRE(rep.residual <= 1e-9 * std::abs(rep.lhs) + 1e-15);
			REQUIRE(std::abs(rep.lhs) <= rep.bound * (1 + 1e-9));
			++checked;
		} catch (const PreconditionError&) {
		}
	}
	CHECK(checked >= 95);
	auto sp = spec_for(2, 1, 1.0);
	auto box = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 2}), 6));
	auto f = sample_for(sp, box, 1);
	CHECK_THROWS_AS(geometric_resolvent_check(box, box, f, sp, cplx(-1, 0), box.site(0), box.site(1)),
	                PreconditionError);
}

TEST_CASE("two-particle verdicts from one-particle verdicts") {
	auto sp = spec_for(2, 1, 15.0, 1.0);
	auto box = make_box(Metric::Sym, {2, 1}, make_point({0, 20}), 8);
	auto field = sample_for(sp, projection_region(box_as_rect(box)), 2024);
	// spectrum of one-particle blocks lies in [0, 19]; take E far below
	auto rep = two_particle_from_one_check(box, field, sp, -10, 10, -5, LiftMode::Regular, 1.0);
	CHECK(rep.gate);
	CHECK(rep.hypotheses);
	CHECK(rep.asserted);
	CHECK(rep.conclusion);
	CHECK_FALSE(rep.violation);
	CHECK(rep.lifted == doctest::Approx(1.0 - 12 * std::log(16.0) / 8));

	auto suit = two_particle_from_one_check(box, field, sp, -10, 10, -5, LiftMode::Suitable, 5.0);
	CHECK(suit.gate);
	CHECK(suit.conclusion);
	CHECK(suit.lifted == 2.5);

	// large mass: hypotheses fail, nothing asserted
	auto fail = two_particle_from_one_check(box, field, sp, -10, 10, -5, LiftMode::Regular, 50.0);
	CHECK_FALSE(fail.gate);
	CHECK_FALSE(fail.asserted);
	CHECK_FALSE(fail.violation);
	auto weak = spec_for(2, 1, 0.0);
	auto near = two_particle_from_one_check(box, zero_field(projection_region(box_as_rect(box))), weak, 1.0, 8, 1.0,
	                                        LiftMode::Regular, 0.1);
	CHECK_FALSE(near.hypotheses);
	CHECK_FALSE(near.asserted);
	CHECK(std::log((10.0 + 5) / 4 + 1) > 1.0);
	CHECK_THROWS_AS(two_particle_from_one_check(box, field, sp, 0, -1, 0, LiftMode::Regular, 1), PreconditionError);
}
