#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lab/errors.hpp"
#include "lab/geometry.hpp"
#include "oracles.hpp"

using namespace lab::geometry;

namespace {

std::vector<double> as_doubles(const Point& p) {
	std::vector<double> v;
	for (auto t : p) v.push_back(from_ticks(t));
	return v;
}

double oracle_dist(Metric m, const Lattice& lat, const Point& a, const Point& b) {
	auto ca = oracle::split(as_doubles(a), lat.n, lat.d);
	auto cb = oracle::split(as_doubles(b), lat.n, lat.d);
	switch (m) {
	case Metric::Inf: return oracle::dist_inf(ca, cb);
	case Metric::Sym: return oracle::dist_sym(ca, cb);
	case Metric::Haus: return oracle::dist_haus(ca, cb);
	}
	return 0;
}

// Membership by scanning a bounding cube with floating distances.
std::set<std::vector<int>> oracle_box(const Box& b) {
	double L = b.side_length();
	double lo = 1e9, hi = -1e9;
	for (auto t : b.center) {
		lo = std::min(lo, from_ticks(t));
		hi = std::max(hi, from_ticks(t));
	}
	std::set<std::vector<int>> out;
	auto c = oracle::split(as_doubles(b.center), b.lat.n, b.lat.d);
	for (auto& y : oracle::cube(b.lat.dim(), static_cast<int>(std::floor(lo - L)), static_cast<int>(std::ceil(hi + L)))) {
		std::vector<double> yd(y.begin(), y.end());
		auto cy = oracle::split(yd, b.lat.n, b.lat.d);
		double dist = b.metric == Metric::Inf ? oracle::dist_inf(c, cy)
		              : b.metric == Metric::Sym ? oracle::dist_sym(c, cy)
		                                        : oracle::dist_haus(c, cy);
		if (dist <= L / 2 + 1e-12) out.insert(y);
	}
	return out;
}

std::set<std::vector<int>> as_set(const Region& r) {
	std::set<std::vector<int>> s;
	for (std::size_t i = 0; i < r.size(); ++i) s.insert(r.site_vec(i));
	return s;
}

Point random_half_point(std::mt19937_64& rng, int dim, int span) {
	std::uniform_int_distribution<int> u(-2 * span, 2 * span);
	Point p;
	for (int k = 0; k < dim; ++k) p.push_back(3 * u(rng));
	return p;
}

} // namespace

TEST_CASE("distance examples") {
	Lattice l2{2, 1};
	CHECK(distance(Metric::Inf, l2, make_point({0, 0}), make_point({2, 3})) == 3);
	CHECK(distance(Metric::Sym, l2, make_point({0, 3}), make_point({3, 0})) == 0);
	Lattice l3{3, 1};
	auto a = make_point({0, 0, 5}), b = make_point({0, 5, 5});
	CHECK(distance(Metric::Haus, l3, a, b) == 0);
	CHECK(distance(Metric::Sym, l3, a, b) == 5);
	CHECK(oracle_dist(Metric::Haus, l3, a, b) == 0);
	CHECK(oracle_dist(Metric::Sym, l3, a, b) == 5);
	CHECK_THROWS_AS(distance(Metric::Inf, l3, make_point({0, 0}), b), lab::PreconditionError);
	CHECK(japanese(0) == 1);
	CHECK(japanese(3) == doctest::Approx(std::sqrt(10.0)));
}

TEST_CASE("exhaustive small grids match oracle and metric chain") {
	for (int n = 1; n <= 3; ++n) {
		Lattice lat{n, 1};
		int span = n == 3 ? 3 : 6;
		auto pts = oracle::cube(n, -span, span);
		for (const auto& a : pts)
			for (const auto& b : pts) {
				Point pa = to_point(a), pb = to_point(b);
				double di = distance(Metric::Inf, lat, pa, pb);
				double ds = distance(Metric::Sym, lat, pa, pb);
				double dh = distance(Metric::Haus, lat, pa, pb);
				REQUIRE(di == oracle_dist(Metric::Inf, lat, pa, pb));
				REQUIRE(ds == oracle_dist(Metric::Sym, lat, pa, pb));
				REQUIRE(dh == oracle_dist(Metric::Haus, lat, pa, pb));
				REQUIRE(dh <= ds);
				REQUIRE(ds <= di);
				if (n == 2) REQUIRE(dh == ds);
			}
	}
}

TEST_CASE("random half-integer pairs") {
	std::mt19937_64 rng(7);
	for (int trial = 0; trial < 10000; ++trial) {
		int n = 1 + trial % 3, d = 1 + (trial / 3) % 2;
		Lattice lat{n, d};
		Point a = random_half_point(rng, lat.dim(), 5), b = random_half_point(rng, lat.dim(), 5);
		for (Metric m : {Metric::Inf, Metric::Sym, Metric::Haus}) REQUIRE(distance(m, lat, a, b) == oracle_dist(m, lat, a, b));
		REQUIRE(distance(Metric::Haus, lat, a, b) <= distance(Metric::Sym, lat, a, b));
		REQUIRE(distance(Metric::Sym, lat, a, b) <= distance(Metric::Inf, lat, a, b));
		if (n == 2) REQUIRE(distance(Metric::Haus, lat, a, b) == distance(Metric::Sym, lat, a, b));
	}
}

TEST_CASE("box examples") {
	auto b1 = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 2));
	CHECK(b1 == Region::from_sites({1, 1}, {{-1}, {0}, {1}}));
	auto s0 = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 2));
	CHECK(s0.size() == 9);
	auto s5 = make_box(Metric::Sym, {2, 1}, make_point({0, 5}), 2);
	auto r5 = enumerate(s5);
	CHECK(r5.size() == 18);
	CHECK(as_set(r5) == oracle_box(s5));
	CHECK_THROWS_AS(make_box(Metric::Inf, {1, 1}, make_point({0}), 0.5), lab::PreconditionError);
}

TEST_CASE("random boxes match oracle; inclusion chain") {
	std::mt19937_64 rng(11);
	for (int trial = 0; trial < 150; ++trial) {
		int n = 1 + trial % 3, d = n == 3 ? 1 : 1 + (trial / 3) % 2;
		Lattice lat{n, d};
		Point c = random_half_point(rng, lat.dim(), 3);
		double side = 1 + 0.5 * (rng() % 6);
		for (Metric m : {Metric::Inf, Metric::Sym, Metric::Haus}) {
			Box b{m, lat, c, to_ticks(side)};
			REQUIRE(as_set(enumerate(b)) == oracle_box(b));
		}
		Box bs{Metric::Sym, lat, c, to_ticks(side)}, bh{Metric::Haus, lat, c, to_ticks(side)};
		Region rs = enumerate(bs), rh = enumerate(bh);
		REQUIRE(rs.subset_of(rh));
		Rect sym{lat, c, std::vector<std::int64_t>(n, to_ticks(side)), true};
		REQUIRE(enumerate(sym) == rs);
	}
}

TEST_CASE("inner third is exact") {
	Box b = make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 6);
	auto r = enumerate(b);
	auto idx = inner_third_indices(b, r);
	CHECK(idx.size() == 9); // dist <= 1
	Box h = make_box(Metric::Inf, {1, 1}, make_point({0.5}), 3);
	auto rh = enumerate(h);
	CHECK(rh.size() == 4); // -1..2
	CHECK(inner_third_indices(h, rh).size() == 2); // 0, 1
}

TEST_CASE("rectangles") {
	Lattice l2{2, 1};
	Rect plain{l2, make_point({0, 0}), {to_ticks(2), to_ticks(2)}, false};
	CHECK(enumerate(plain).size() == 9);
	Rect sym{l2, make_point({0, 10}), {to_ticks(2), to_ticks(4)}, true};
	auto rs = enumerate(sym);
	CHECK(rs.size() == 30);
	CHECK(rs.size() <= 2 * 4 * 4);

	std::mt19937_64 rng(3);
	for (int t = 0; t < 50; ++t) {
		Lattice lat{t % 2 ? 2 : 3, 1};
		Point c = random_half_point(rng, lat.dim(), 4);
		std::vector<std::int64_t> sides;
		for (int i = 0; i < lat.n; ++i) sides.push_back(to_ticks(1 + 0.5 * (rng() % 5)));
		Rect p{lat, c, sides, false}, s{lat, c, sides, true};
		auto base = enumerate(p);
		std::set<std::vector<int>> images;
		for (std::size_t i = 0; i < base.size(); ++i) {
			auto y = base.site_vec(i);
			std::vector<int> perm(lat.n);
			std::iota(perm.begin(), perm.end(), 0);
			do {
				std::vector<int> py(lat.dim());
				for (int j = 0; j < lat.n; ++j) py[j] = y[perm[j]];
				images.insert(py);
			} while (std::next_permutation(perm.begin(), perm.end()));
		}
		REQUIRE(as_set(enumerate(s)) == images);
	}
}

TEST_CASE("projections") {
	Lattice l2{2, 1};
	Rect r{l2, make_point({0, 5}), {to_ticks(2), to_ticks(2)}, false};
	CHECK(projection_region(r, 0) == Region::from_sites({1, 1}, {{-1}, {0}, {1}}));
	CHECK(projection_region(r) == Region::from_sites({1, 1}, {{-1}, {0}, {1}, {4}, {5}, {6}}));
	Rect rs = r;
	rs.symmetrized = true;
	CHECK(projection_region(rs) == projection_region(r));
	CHECK_THROWS(projection(r, 2));
}

TEST_CASE("boundary sets") {
	auto inner = enumerate(make_box(Metric::Inf, {1, 1}, make_point({0}), 2));
	auto b = boundary_sets(inner);
	CHECK(b.minus == Region::from_sites({1, 1}, {{-1}, {1}}));
	CHECK(b.plus == Region::from_sites({1, 1}, {{-2}, {2}}));
	CHECK(b.edges.size() == 2);
	auto same = boundary_sets(inner, &inner);
	CHECK(same.edges.empty());
	CHECK(same.minus.empty());
	CHECK(same.plus.empty());
	auto small = enumerate(make_box(Metric::Inf, {1, 1}, make_point({10}), 2));
	CHECK_THROWS_AS(boundary_sets(small, &inner), lab::PreconditionError);

	// Edge counts by a direct neighbour scan of the oracle set.
	for (int l : {4, 6, 8}) {
		Box box = make_box(Metric::Sym, {2, 1}, make_point({0, 0}), l);
		auto region = enumerate(box);
		auto set = oracle_box(box);
		std::size_t edges = 0;
		for (const auto& u : set)
			for (int k = 0; k < 2; ++k)
				for (int s : {-1, 1}) {
					auto v = u;
					v[k] += s;
					if (!set.count(v)) ++edges;
				}
		CHECK(boundary_sets(region).edges.size() == edges);
		CHECK(edges == 4 * static_cast<std::size_t>(l + 1));
	}
}

TEST_CASE("boundary lemma on symmetrized boxes") {
	std::mt19937_64 rng(5);
	for (int t = 0; t < 50; ++t) {
		Lattice lat{2, 1 + t % 2};
		Point c = random_half_point(rng, lat.dim(), 6);
		double l = 2 + 0.5 * (rng() % 9);
		Box box{Metric::Sym, lat, c, to_ticks(l)};
		auto region = enumerate(box);
		auto b = boundary_sets(region);
		for (auto [i, j] : b.edges) {
			double da = distance(Metric::Sym, lat, to_point(region.site(i)), c);
			double db = distance(Metric::Sym, lat, to_point(b.plus.site(j)), c);
			REQUIRE(l / 2 - 1 < da);
			REQUIRE(da <= l / 2);
			REQUIRE(l / 2 < db);
			REQUIRE(db <= l / 2 + 1);
		}
	}
}

TEST_CASE("partial cover") {
	Box outer = make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 14);
	Cover c = partial_cover(outer, 3);
	REQUIRE(c.size() == 25);
	std::set<std::int64_t> offsets;
	for (const auto& y : c.centers) offsets.insert(y[0] / kTicks);
	CHECK(offsets == std::set<std::int64_t>{-4, -2, 0, 2, 4});
	CHECK(c.count_bound == 900);
	CHECK(c.step == to_ticks(2));

	// Coverage by exhaustive membership scan.
	auto check_coverage = [](const Cover& cov) {
		Box shrunk = cov.outer;
		shrunk.side -= 2 * cov.cell_side;
		auto core = enumerate(shrunk);
		std::size_t missed = 0;
		for (std::size_t s = 0; s < core.size(); ++s) {
			bool hit = false;
			for (std::size_t i = 0; i < cov.size() && !hit; ++i) hit = in_inner_third(cov.cell(i), core.site(s));
			missed += !hit;
		}
		return missed;
	};
	CHECK(check_coverage(c) == c.uncovered);
	CHECK_FALSE(c.coverage); // inner thirds of side 1 leave the odd offsets uncovered

	Cover c6 = partial_cover(make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 30), 6);
	CHECK(c6.coverage);
	CHECK(check_coverage(c6) == 0);
	Cover ch = partial_cover(make_box(Metric::Sym, {2, 1}, make_point({0.5, 3.5}), 15), 3);
	CHECK(check_coverage(ch) == ch.uncovered);
	CHECK(ch.coverage);

	// containment and avoidance of the inner boundary
	auto outer_region = enumerate(outer);
	auto minus = boundary_sets(outer_region).minus;
	for (std::size_t i = 0; i < c.size(); ++i) {
		auto cell = enumerate(c.cell(i));
		CHECK(cell.subset_of(outer_region));
		CHECK(set_intersection(cell, minus).empty());
	}
	CHECK(neighbour_cells(c, 12).size() == 8);
	CHECK_THROWS_AS(partial_cover(outer, 14), lab::PreconditionError);
	CHECK_THROWS_AS(partial_cover(make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 5), 3), lab::PreconditionError);
}

TEST_CASE("interactivity") {
	auto a = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 0}), 2));
	CHECK(is_interactive(a, 1));
	auto b = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 10}), 2));
	CHECK_FALSE(is_interactive(b, 1));
	int gap = 1000;
	for (std::size_t i = 0; i < b.size(); ++i) gap = std::min(gap, std::abs(b.site(i)[0] - b.site(i)[1]));
	CHECK(gap == 8);
	std::mt19937_64 rng(9);
	for (int t = 0; t < 50; ++t) {
		Point c = random_half_point(rng, 2, 4);
		auto p = enumerate(Box{Metric::Inf, {2, 1}, c, to_ticks(2)});
		auto s = enumerate(Box{Metric::Sym, {2, 1}, c, to_ticks(2)});
		REQUIRE(is_interactive(p, 1) == is_interactive(s, 1));
	}
}

namespace {

Separation oracle_separation(const Rect& a, const Rect& b) {
	std::set<std::vector<int>> pa[2], pb[2];
	for (int j = 0; j < 2; ++j) {
		pa[j] = as_set(projection_region(a, j));
		pb[j] = as_set(projection_region(b, j));
	}
	auto disjoint = [](const std::set<std::vector<int>>& x, const std::set<std::vector<int>>& y) {
		for (const auto& v : x)
			if (y.count(v)) return false;
		return true;
	};
	std::set<std::vector<int>> ua = pa[0], ub = pb[0];
	ua.insert(pa[1].begin(), pa[1].end());
	ub.insert(pb[1].begin(), pb[1].end());
	if (disjoint(ua, ub)) return Separation::Fully;
	for (int j = 0; j < 2; ++j)
		if (disjoint(pa[j], ub) || disjoint(pb[j], ua)) return Separation::Partially;
	return Separation::Neither;
}

} // namespace

TEST_CASE("separation") {
	Lattice l2{2, 1};
	auto box = [&](double a, double b) { return make_box(Metric::Sym, l2, make_point({a, b}), 2); };
	CHECK(separation_class(box(0, 0), box(100, 100)) == Separation::Fully);
	CHECK(separation_class(box(0, 0), box(0, 100)) == Separation::Partially);
	CHECK(separation_class(box(0, 0), box(0, 0)) == Separation::Neither);

	std::mt19937_64 rng(13);
	for (int t = 0; t < 2000; ++t) {
		Lattice lat{2, 1 + t % 2};
		Point ca = random_half_point(rng, lat.dim(), 8), cb = random_half_point(rng, lat.dim(), 8);
		Rect a{lat, ca, {to_ticks(1 + rng() % 4), to_ticks(1 + rng() % 4)}, true};
		Rect b{lat, cb, {to_ticks(1 + rng() % 4), to_ticks(1 + rng() % 4)}, true};
		REQUIRE(separation_class(a, b) == oracle_separation(a, b));
	}
}

TEST_CASE("L-distant pairs") {
	Lattice l2{2, 1};
	auto A = make_box(Metric::Sym, l2, make_point({0, 0}), 2);
	CHECK(is_L_distant(A, make_box(Metric::Sym, l2, make_point({17, 0}), 2)));
	CHECK_FALSE(is_L_distant(A, make_box(Metric::Sym, l2, make_point({16, 0}), 2)));

	std::mt19937_64 rng(17);
	int r0 = 1, checked = 0;
	for (int t = 0; t < 200; ++t) {
		double L = 3 + rng() % 4;
		Point ca = random_half_point(rng, 2, 40), cb = random_half_point(rng, 2, 40);
		cb[0] += to_ticks(8 * L + 1) * (rng() % 2 ? 1 : -1);
		Box a{Metric::Sym, l2, ca, to_ticks(L)}, b{Metric::Sym, l2, cb, to_ticks(L)};
		if (!is_L_distant(a, b)) continue;
		++checked;
		auto s = separation_class(a, b);
		REQUIRE(s != Separation::Neither);
		bool interactive = is_interactive(enumerate(a), r0) && is_interactive(enumerate(b), r0);
		if (interactive && 3 * L + 2 * r0 < 4 * L) REQUIRE(s == Separation::Fully);
	}
	CHECK(checked > 100);
}

TEST_CASE("region dump round trip") {
	auto r = enumerate(make_box(Metric::Sym, {2, 1}, make_point({0, 5}), 2));
	auto text = r.dump();
	CHECK(text.rfind("2 1 18\n", 0) == 0);
	CHECK(Region::parse(text) == r);
	CHECK_THROWS_AS(Region::parse("2 1 3\n0 0\n"), lab::ConfigError);
}
