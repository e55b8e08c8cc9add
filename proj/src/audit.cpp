#include "lab/audit.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>
#include <sstream>

#include "lab/geometry.hpp"
#include "lab/rng.hpp"

namespace lab::audit {

using geometry::Box;
using geometry::kTicks;
using geometry::Lattice;
using geometry::Metric;
using geometry::Point;
using geometry::Region;
using geometry::Site;

namespace {

// ---- brute-force references on tick coordinates ----

std::int64_t particle_sup(const Point& a, const Point& b, int i, int j, int d) {
	std::int64_t m = 0;
	for (int k = 0; k < d; ++k) m = std::max(m, std::abs(a[i * d + k] - b[j * d + k]));
	return m;
}

std::int64_t b_inf(const Point& a, const Point& b, int n, int d) {
	std::int64_t m = 0;
	for (int i = 0; i < n; ++i) m = std::max(m, particle_sup(a, b, i, i, d));
	return m;
}

std::int64_t b_sym(const Point& a, const Point& b, int n, int d) {
	std::vector<int> perm(n);
	std::iota(perm.begin(), perm.end(), 0);
	std::int64_t best = INT64_MAX;
	do {
		std::int64_t m = 0;
		for (int i = 0; i < n; ++i) m = std::max(m, particle_sup(a, b, perm[i], i, d));
		best = std::min(best, m);
	} while (std::next_permutation(perm.begin(), perm.end()));
	return best;
}

std::int64_t b_haus(const Point& a, const Point& b, int n, int d) {
	std::int64_t m = 0;
	for (int i = 0; i < n; ++i) {
		std::int64_t ab = INT64_MAX, ba = INT64_MAX;
		for (int j = 0; j < n; ++j) {
			ab = std::min(ab, particle_sup(a, b, i, j, d));
			ba = std::min(ba, particle_sup(b, a, i, j, d));
		}
		m = std::max({m, ab, ba});
	}
	return m;
}

std::int64_t b_dist(Metric m, const Point& a, const Point& b, int n, int d) {
	switch (m) {
	case Metric::Inf: return b_inf(a, b, n, d);
	case Metric::Sym: return b_sym(a, b, n, d);
	case Metric::Haus: return b_haus(a, b, n, d);
	}
	return 0;
}

Point ticks_of(const std::vector<int>& s) {
	Point p(s.size());
	for (std::size_t k = 0; k < s.size(); ++k) p[k] = s[k] * kTicks;
	return p;
}

// Every integer vector of the cube [lo, hi]^dim.
template <class F>
void for_cube(int dim, int lo, int hi, F&& f) {
	std::vector<int> cur(dim, lo);
	while (true) {
		f(cur);
		int k = dim - 1;
		while (k >= 0 && cur[k] == hi) cur[k--] = lo;
		if (k < 0) return;
		++cur[k];
	}
}

std::string show(const Point& p) {
	std::ostringstream os;
	os << "(";
	for (std::size_t k = 0; k < p.size(); ++k) os << (k ? "," : "") << geometry::from_ticks(p[k]);
	os << ")";
	return os.str();
}

void note(AuditRow& row, bool ok, const std::string& what) {
	++row.cases;
	if (!ok) {
		if (!row.mismatches) row.first = what;
		++row.mismatches;
	}
}

std::int64_t grid_coord(rng::Stream& s, int span) {
	// multiple of 1/6 in [-span, span]
	return static_cast<std::int64_t>(s.next() % (2 * span * kTicks + 1)) - span * kTicks;
}

Region brute_box(const Box& b) {
	int n = b.lat.n, d = b.lat.d, dim = b.lat.dim();
	std::int64_t lo = *std::min_element(b.center.begin(), b.center.end()) - b.side;
	std::int64_t hi = *std::max_element(b.center.begin(), b.center.end()) + b.side;
	std::vector<Site> sites;
	for_cube(dim, static_cast<int>(lo / kTicks) - 1, static_cast<int>(hi / kTicks) + 1, [&](const std::vector<int>& s) {
		if (2 * b_dist(b.metric, ticks_of(s), b.center, n, d) <= b.side) sites.push_back(s);
	});
	return Region::from_sites(b.lat, sites);
}

std::set<int> particle_sites(const geometry::Rect& r, int j) {
	std::set<int> out;
	int d = r.lat.d;
	if (d != 1) return out;
	std::int64_t c = r.center[j];
	for (int k = static_cast<int>((c - r.sides[j]) / kTicks) - 1; k <= (c + r.sides[j]) / kTicks + 1; ++k)
		if (2 * std::abs(k * kTicks - c) <= r.sides[j]) out.insert(k);
	return out;
}

bool disjoint(const std::set<int>& a, const std::set<int>& b) {
	for (int x : a)
		if (b.count(x)) return false;
	return true;
}

} // namespace

bool AuditReport::ok() const {
	return std::all_of(rows.begin(), rows.end(), [](const AuditRow& r) { return r.mismatches == 0 && r.cases > 0; });
}

const AuditRow* AuditReport::find(const std::string& check) const {
	for (const auto& r : rows)
		if (r.check == check) return &r;
	return nullptr;
}

std::string AuditReport::csv() const {
	std::ostringstream os;
	os << "check,cases,mismatches\n";
	for (const auto& r : rows) os << r.check << "," << r.cases << "," << r.mismatches << "\n";
	return os.str();
}

nlohmann::json AuditReport::to_json() const {
	nlohmann::json rs = nlohmann::json::array();
	for (const auto& r : rows)
		rs.push_back({{"check", r.check}, {"cases", r.cases}, {"mismatches", r.mismatches}, {"first", r.first}});
	return {{"rows", rs}, {"ok", ok()}};
}

AuditRow boundary_audit(std::size_t boxes, std::uint64_t seed) {
	AuditRow row{"boundary_lemma", 0, 0, {}};
	rng::Stream s(rng::derive(seed, 7));
	for (std::size_t i = 0; i < boxes; ++i) {
		Lattice lat = i % 5 == 3 ? Lattice{2, 2} : (i % 5 == 4 ? Lattice{3, 1} : Lattice{2, 1});
		Point c(lat.dim());
		for (auto& x : c) x = grid_coord(s, 3);
		std::int64_t side = 2 * kTicks + static_cast<std::int64_t>(s.next() % (6 * kTicks + 1));
		if (lat.dim() >= 3) side = std::min<std::int64_t>(side, 5 * kTicks);
		Box b{Metric::Sym, lat, c, side};
		Region reg = geometry::enumerate(b);
		auto bd = geometry::boundary_sets(reg);
		for (auto [ia, ib] : bd.edges) {
			std::int64_t da = geometry::dist_ticks(Metric::Sym, lat, geometry::to_point(reg.site(ia)), c);
			std::int64_t db = geometry::dist_ticks(Metric::Sym, lat, geometry::to_point(bd.plus.site(ib)), c);
			bool ok = side - 2 * kTicks < 2 * da && 2 * da <= side && side < 2 * db && 2 * db <= side + 2 * kTicks;
			note(row, ok, "edge at box " + show(c) + " side " + std::to_string(geometry::from_ticks(side)));
		}
	}
	return row;
}

AuditReport geometry_audit(const AuditParams& p, std::uint64_t seed) {
	AuditReport rep;
	rng::Stream s(seed);

	// exhaustive integer grids, d = 1
	AuditRow ex{"exhaustive_distances", 0, 0, {}}, chain{"metric_chain", 0, 0, {}}, pair_eq{"haus_equals_sym_n2", 0, 0, {}};
	for (int n = 1; n <= p.max_n; ++n) {
		Lattice lat{n, 1};
		std::vector<Point> pts;
		for_cube(n, -p.range, p.range, [&](const std::vector<int>& v) { pts.push_back(ticks_of(v)); });
		for (const auto& a : pts)
			for (const auto& b : pts) {
				std::int64_t di = geometry::dist_ticks(Metric::Inf, lat, a, b);
				std::int64_t ds = geometry::dist_ticks(Metric::Sym, lat, a, b);
				std::int64_t dh = geometry::dist_ticks(Metric::Haus, lat, a, b);
				bool ok = di == b_inf(a, b, n, 1) && ds == b_sym(a, b, n, 1) && dh == b_haus(a, b, n, 1);
				++ex.cases;
				if (!ok) {
					if (!ex.mismatches) ex.first = show(a) + " " + show(b);
					++ex.mismatches;
				}
				++chain.cases;
				if (!(dh <= ds && ds <= di)) {
					if (!chain.mismatches) chain.first = show(a) + " " + show(b);
					++chain.mismatches;
				}
				if (n == 2) {
					++pair_eq.cases;
					if (dh != ds) ++pair_eq.mismatches;
				}
			}
	}

	// random pairs on the 1/6 grid
	AuditRow rnd{"random_distances", 0, 0, {}};
	for (std::size_t i = 0; i < p.random_pairs; ++i) {
		int n = 1 + static_cast<int>(s.next() % 3), d = 1 + static_cast<int>(s.next() % 2);
		Lattice lat{n, d};
		Point a(n * d), b(n * d);
		for (auto& x : a) x = grid_coord(s, 10);
		for (auto& x : b) x = grid_coord(s, 10);
		bool ok = true;
		for (Metric m : {Metric::Inf, Metric::Sym, Metric::Haus})
			ok &= geometry::dist_ticks(m, lat, a, b) == b_dist(m, a, b, n, d);
		std::int64_t di = b_inf(a, b, n, d), ds = b_sym(a, b, n, d), dh = b_haus(a, b, n, d);
		ok &= dh <= ds && ds <= di;
		if (n == 2) ok &= dh == ds;
		note(rnd, ok, show(a) + " " + show(b));
	}

	// box enumeration
	AuditRow boxes{"box_enumeration", 0, 0, {}};
	for (std::size_t i = 0; i < p.boxes; ++i) {
		int n = 1 + static_cast<int>(s.next() % 3);
		int d = n <= 2 ? 1 + static_cast<int>(s.next() % 2) : 1;
		Lattice lat{n, d};
		Metric m = static_cast<Metric>(s.next() % 3);
		Point c(lat.dim());
		for (auto& x : c) x = grid_coord(s, 3);
		std::int64_t side = kTicks + static_cast<std::int64_t>(s.next() % (5 * kTicks + 1));
		Box b{m, lat, c, side};
		note(boxes, geometry::enumerate(b) == brute_box(b),
		     geometry::to_string(m) + " box at " + show(c) + " side " + std::to_string(geometry::from_ticks(side)));
	}

	// partial covers
	AuditRow cov{"cover_centers", 0, 0, {}}, cells{"cover_cells_interior", 0, 0, {}}, covflag{"cover_coverage_flag", 0, 0, {}};
	for (std::size_t i = 0; i < p.covers; ++i) {
		int kind = static_cast<int>(i % 3);
		Lattice lat = kind == 0 ? Lattice{1, 1} : (kind == 1 ? Lattice{2, 1} : Lattice{1, 2});
		Metric m = kind == 1 ? Metric::Sym : Metric::Inf;
		int ell = 3 * (1 + static_cast<int>(s.next() % 2));
		int Y = 3 + static_cast<int>(s.next() % 4);
		Point c(lat.dim());
		for (auto& x : c) x = grid_coord(s, 5);
		Box outer{m, lat, c, geometry::to_ticks(ell * Y)};
		auto cover = geometry::partial_cover(outer, ell);
		std::int64_t step = geometry::to_ticks(ell) / 3 + kTicks;
		std::int64_t reach = outer.side - 2 * geometry::to_ticks(ell);
		std::set<Point> expect;
		int kmax = 0;
		while (2 * (kmax + 1) * step <= reach) ++kmax;
		for_cube(lat.dim(), -kmax, kmax, [&](const std::vector<int>& v) {
			Point y = c;
			for (int k = 0; k < lat.dim(); ++k) y[k] += v[k] * step;
			expect.insert(y);
		});
		std::set<Point> got(cover.centers.begin(), cover.centers.end());
		note(cov, got == expect && got.size() == cover.size(), "cover at " + show(c));

		bool inside = true;
		for (std::size_t j = 0; j < cover.size() && inside; ++j) {
			Region cell = geometry::enumerate(cover.cell(j));
			for (std::size_t u = 0; u < cell.size() && inside; ++u) {
				Point pu = geometry::to_point(cell.site(u));
				if (2 * b_dist(m, pu, c, lat.n, lat.d) > outer.side) inside = false;
				for (int k = 0; k < lat.dim() && inside; ++k)
					for (int sg : {-1, 1}) {
						Point q = pu;
						q[k] += sg * kTicks;
						if (2 * b_dist(m, q, c, lat.n, lat.d) > outer.side) inside = false;
					}
			}
		}
		note(cells, inside, "cover at " + show(c));

		bool covered = true;
		Region shrunk = brute_box(Box{m, lat, c, outer.side - 2 * geometry::to_ticks(ell)});
		for (std::size_t u = 0; u < shrunk.size() && covered; ++u) {
			Point pu = geometry::to_point(shrunk.site(u));
			bool hit = false;
			for (const auto& y : cover.centers)
				if (6 * b_dist(m, pu, y, lat.n, lat.d) <= geometry::to_ticks(ell)) {
					hit = true;
					break;
				}
			covered = hit;
		}
		note(covflag, covered == cover.coverage, "cover at " + show(c));
	}

	// separation classes and L-distance
	AuditRow sep{"separation", 0, 0, {}}, ldist{"L_distance", 0, 0, {}};
	Lattice two{2, 1};
	for (std::size_t i = 0; i < p.separations; ++i) {
		geometry::Rect a{two, Point(2), {}, true}, b{two, Point(2), {}, true};
		for (auto* r : {&a, &b}) {
			for (auto& x : r->center) x = grid_coord(s, 10);
			r->sides = {kTicks + static_cast<std::int64_t>(s.next() % (7 * kTicks)),
			            kTicks + static_cast<std::int64_t>(s.next() % (7 * kTicks))};
		}
		std::set<int> pa[2] = {particle_sites(a, 0), particle_sites(a, 1)};
		std::set<int> pb[2] = {particle_sites(b, 0), particle_sites(b, 1)};
		bool dis[2][2];
		bool all = true;
		for (int x = 0; x < 2; ++x)
			for (int y = 0; y < 2; ++y) all &= (dis[x][y] = disjoint(pa[x], pb[y]));
		geometry::Separation expect = geometry::Separation::Neither;
		if (all) expect = geometry::Separation::Fully;
		else if ((dis[0][0] && dis[0][1]) || (dis[1][0] && dis[1][1]) || (dis[0][0] && dis[1][0]) ||
		         (dis[0][1] && dis[1][1]))
			expect = geometry::Separation::Partially;
		note(sep, geometry::separation_class(a, b) == expect, show(a.center) + " " + show(b.center));

		Box ba{Metric::Sym, two, a.center, a.sides[0]}, bb{Metric::Sym, two, b.center, a.sides[0]};
		note(ldist, geometry::is_L_distant(ba, bb) == (b_sym(a.center, b.center, 2, 1) > 8 * a.sides[0]),
		     show(a.center) + " " + show(b.center));
	}

	rep.rows = {ex, chain, pair_eq, rnd, boxes, cov, cells, covflag, sep, ldist, boundary_audit(p.boundary_boxes, seed)};
	return rep;
}

} // namespace lab::audit
