#include "lab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "lab/errors.hpp"

namespace lab::geometry {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
	std::int64_t q = a / b;
	if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
	return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

int compare_rows(const int* a, const int* b, int dim) {
	for (int k = 0; k < dim; ++k) {
		if (a[k] < b[k]) return -1;
		if (a[k] > b[k]) return 1;
	}
	return 0;
}

// sup norm between particle i of a and particle j of b
std::int64_t particle_gap(std::span<const std::int64_t> a, std::size_t i, std::span<const std::int64_t> b,
                          std::size_t j, int d) {
	std::int64_t m = 0;
	for (int k = 0; k < d; ++k) m = std::max(m, std::abs(a[i * d + k] - b[j * d + k]));
	return m;
}

void check_size(std::size_t count) {
	if (count > kMaxRegion) throw CeilingError("region enumeration ceiling exceeded (" + std::to_string(count) + " sites)");
}

// Enumerate the product of integer intervals, last coordinate fastest.
void append_product(const std::vector<std::pair<int, int>>& ext, std::vector<int>& out) {
	std::size_t count = 1;
	for (auto [lo, hi] : ext) {
		if (hi < lo) return;
		count *= static_cast<std::size_t>(hi - lo + 1);
		check_size(count);
	}
	std::size_t dim = ext.size();
	std::vector<int> cur(dim);
	for (std::size_t k = 0; k < dim; ++k) cur[k] = ext[k].first;
	out.reserve(out.size() + count * dim);
	for (std::size_t c = 0; c < count; ++c) {
		out.insert(out.end(), cur.begin(), cur.end());
		for (std::size_t k = dim; k-- > 0;) {
			if (cur[k] < ext[k].second) {
				++cur[k];
				break;
			}
			cur[k] = ext[k].first;
		}
	}
}

std::pair<int, int> interval(std::int64_t c, std::int64_t side) {
	// integers y with 2|6y - c| <= side
	return {static_cast<int>(ceil_div(2 * c - side, 2 * kTicks)), static_cast<int>(floor_div(2 * c + side, 2 * kTicks))};
}

Point permute(const Point& x, const std::vector<int>& pi, int d) {
	Point y(x.size());
	for (std::size_t i = 0; i < pi.size(); ++i)
		for (int k = 0; k < d; ++k) y[i * d + k] = x[pi[i] * d + k];
	return y;
}

} // namespace

void Lattice::validate() const {
	if (n < 1 || d < 1) throw PreconditionError("lattice needs n >= 1 and d >= 1");
	if (n * d > kMaxDim) throw CeilingError("n*d exceeds the enumeration ceiling");
}

Metric parse_metric(const std::string& s) {
	if (s == "inf" || s == "infinity") return Metric::Inf;
	if (s == "sym" || s == "symmetrized" || s == "S") return Metric::Sym;
	if (s == "haus" || s == "hausdorff" || s == "H") return Metric::Haus;
	throw ConfigError("unknown distance kind '" + s + "'");
}

std::string to_string(Metric m) {
	switch (m) {
	case Metric::Inf: return "inf";
	case Metric::Sym: return "sym";
	case Metric::Haus: return "haus";
	}
	return "?";
}

Point to_point(std::span<const int> site) {
	Point p(site.size());
	for (std::size_t k = 0; k < site.size(); ++k) p[k] = kTicks * site[k];
	return p;
}

std::int64_t to_ticks(double length) {
	double t = length * kTicks;
	double r = std::round(t);
	if (std::abs(t - r) > 1e-9) throw PreconditionError("value is not a multiple of 1/6");
	return static_cast<std::int64_t>(r);
}

double from_ticks(std::int64_t t) { return static_cast<double>(t) / kTicks; }

Point make_point(const std::vector<double>& coords) {
	Point p;
	p.reserve(coords.size());
	for (double c : coords) p.push_back(to_ticks(c));
	return p;
}

Point make_point(std::initializer_list<double> coords) { return make_point(std::vector<double>(coords)); }

const std::vector<std::vector<int>>& permutations(int n) {
	static std::map<int, std::vector<std::vector<int>>> cache;
	auto it = cache.find(n);
	if (it != cache.end()) return it->second;
	std::vector<std::vector<int>> all;
	std::vector<int> p(n);
	std::iota(p.begin(), p.end(), 0);
	do all.push_back(p);
	while (std::next_permutation(p.begin(), p.end()));
	return cache.emplace(n, std::move(all)).first->second;
}

std::int64_t dist_ticks(Metric m, const Lattice& lat, std::span<const std::int64_t> a,
                        std::span<const std::int64_t> b) {
	std::size_t dim = lat.dim();
	if (a.size() != dim || b.size() != dim) throw PreconditionError("dimension mismatch");
	int n = lat.n, d = lat.d;
	switch (m) {
	case Metric::Inf: {
		std::int64_t r = 0;
		for (std::size_t k = 0; k < dim; ++k) r = std::max(r, std::abs(a[k] - b[k]));
		return r;
	}
	case Metric::Sym: {
		std::int64_t best = -1;
		for (const auto& pi : permutations(n)) {
			std::int64_t r = 0;
			for (int i = 0; i < n && (best < 0 || r < best); ++i) r = std::max(r, particle_gap(a, pi[i], b, i, d));
			if (best < 0 || r < best) best = r;
		}
		return best;
	}
	case Metric::Haus: {
		std::int64_t r = 0;
		for (int i = 0; i < n; ++i) {
			std::int64_t ab = -1, ba = -1;
			for (int j = 0; j < n; ++j) {
				std::int64_t g1 = particle_gap(a, i, b, j, d);
				std::int64_t g2 = particle_gap(b, i, a, j, d);
				if (ab < 0 || g1 < ab) ab = g1;
				if (ba < 0 || g2 < ba) ba = g2;
			}
			r = std::max({r, ab, ba});
		}
		return r;
	}
	}
	return 0;
}

double distance(Metric m, const Lattice& lat, const Point& a, const Point& b) {
	return from_ticks(dist_ticks(m, lat, a, b));
}

int site_distance(Metric m, const Lattice& lat, std::span<const int> a, std::span<const int> b) {
	return static_cast<int>(dist_ticks(m, lat, to_point(a), to_point(b)) / kTicks);
}

double japanese(double t) { return std::sqrt(1.0 + t * t); }

// ---- Region ----

Region Region::from_flat(Lattice lat, std::vector<int> coords) {
	Region r(lat);
	int dim = lat.dim();
	std::size_t count = coords.size() / dim;
	std::vector<std::size_t> idx(count);
	std::iota(idx.begin(), idx.end(), 0);
	const int* base = coords.data();
	std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
		return compare_rows(base + i * dim, base + j * dim, dim) < 0;
	});
	r.coords_.reserve(coords.size());
	const int* prev = nullptr;
	for (std::size_t i : idx) {
		const int* row = base + i * dim;
		if (prev && compare_rows(prev, row, dim) == 0) continue;
		r.coords_.insert(r.coords_.end(), row, row + dim);
		prev = row;
	}
	return r;
}

Region Region::from_sites(Lattice lat, const std::vector<Site>& sites) {
	std::vector<int> flat;
	for (const auto& s : sites) {
		if (static_cast<int>(s.size()) != lat.dim()) throw PreconditionError("dimension mismatch");
		flat.insert(flat.end(), s.begin(), s.end());
	}
	return from_flat(lat, std::move(flat));
}

Site Region::site_vec(std::size_t i) const {
	auto s = site(i);
	return Site(s.begin(), s.end());
}

std::optional<std::size_t> Region::find(std::span<const int> s) const {
	int dim = lat_.dim();
	if (static_cast<int>(s.size()) != dim) throw PreconditionError("dimension mismatch");
	std::size_t lo = 0, hi = size();
	while (lo < hi) {
		std::size_t mid = (lo + hi) / 2;
		int c = compare_rows(coords_.data() + mid * dim, s.data(), dim);
		if (c == 0) return mid;
		if (c < 0) lo = mid + 1;
		else hi = mid;
	}
	return std::nullopt;
}

bool Region::subset_of(const Region& other) const {
	for (std::size_t i = 0; i < size(); ++i)
		if (!other.contains(site(i))) return false;
	return true;
}

std::string Region::dump() const {
	std::ostringstream os;
	os << lat_.n << ' ' << lat_.d << ' ' << size() << '\n';
	for (std::size_t i = 0; i < size(); ++i) {
		auto s = site(i);
		for (std::size_t k = 0; k < s.size(); ++k) os << (k ? " " : "") << s[k];
		os << '\n';
	}
	return os.str();
}

Region Region::parse(const std::string& text) {
	std::istringstream is(text);
	Lattice lat;
	std::size_t count = 0;
	if (!(is >> lat.n >> lat.d >> count)) throw ConfigError("region dump: bad header");
	lat.validate();
	std::vector<int> flat(count * lat.dim());
	for (auto& v : flat)
		if (!(is >> v)) throw ConfigError("region dump: truncated");
	Region r = from_flat(lat, std::move(flat));
	if (r.size() != count) throw ConfigError("region dump: duplicate sites");
	return r;
}

namespace {

template <class Keep>
Region merge(const Region& a, const Region& b, Keep keep) {
	if (!(a.lattice() == b.lattice())) throw PreconditionError("lattice mismatch");
	int dim = a.lattice().dim();
	std::vector<int> out;
	std::size_t i = 0, j = 0;
	while (i < a.size() || j < b.size()) {
		int c;
		if (i == a.size()) c = 1;
		else if (j == b.size()) c = -1;
		else c = compare_rows(a.site(i).data(), b.site(j).data(), dim);
		if (c < 0) {
			if (keep(true, false)) out.insert(out.end(), a.site(i).begin(), a.site(i).end());
			++i;
		} else if (c > 0) {
			if (keep(false, true)) out.insert(out.end(), b.site(j).begin(), b.site(j).end());
			++j;
		} else {
			if (keep(true, true)) out.insert(out.end(), a.site(i).begin(), a.site(i).end());
			++i;
			++j;
		}
	}
	return Region::from_flat(a.lattice(), std::move(out));
}

} // namespace

Region set_union(const Region& a, const Region& b) {
	return merge(a, b, [](bool, bool) { return true; });
}
Region set_difference(const Region& a, const Region& b) {
	return merge(a, b, [](bool x, bool y) { return x && !y; });
}
Region set_intersection(const Region& a, const Region& b) {
	return merge(a, b, [](bool x, bool y) { return x && y; });
}

// ---- boxes ----

Box make_box(Metric m, Lattice lat, Point center, double side) {
	lat.validate();
	if (static_cast<int>(center.size()) != lat.dim()) throw PreconditionError("center has wrong dimension");
	Box b{m, lat, std::move(center), to_ticks(side)};
	if (b.side < kTicks) throw PreconditionError("box side must be >= 1");
	return b;
}

bool in_box(const Box& b, std::span<const int> y) {
	return 2 * dist_ticks(b.metric, b.lat, b.center, to_point(y)) <= b.side;
}

bool in_inner_third(const Box& b, std::span<const int> y) {
	return 6 * dist_ticks(b.metric, b.lat, b.center, to_point(y)) <= b.side;
}

std::vector<std::pair<int, int>> box_extent(const Box& b) {
	std::vector<std::pair<int, int>> ext;
	for (auto c : b.center) ext.push_back(interval(c, b.side));
	return ext;
}

Region enumerate(const Box& b) {
	b.lat.validate();
	std::vector<int> flat;
	switch (b.metric) {
	case Metric::Inf: append_product(box_extent(b), flat); break;
	case Metric::Sym: {
		for (const auto& pi : permutations(b.lat.n)) {
			Box pb{Metric::Inf, b.lat, permute(b.center, pi, b.lat.d), b.side};
			append_product(box_extent(pb), flat);
			check_size(flat.size() / b.lat.dim());
		}
		break;
	}
	case Metric::Haus: {
		int n = b.lat.n, d = b.lat.d;
		std::vector<int> choice(n, 0);
		std::size_t combos = 1;
		for (int i = 0; i < n; ++i) combos *= n;
		for (std::size_t c = 0; c < combos; ++c) {
			std::size_t code = c;
			Point y(n * d);
			for (int i = 0; i < n; ++i) {
				int j = static_cast<int>(code % n);
				code /= n;
				for (int k = 0; k < d; ++k) y[i * d + k] = b.center[j * d + k];
			}
			append_product(box_extent(Box{Metric::Inf, b.lat, y, b.side}), flat);
			check_size(flat.size() / b.lat.dim());
		}
		Region super = Region::from_flat(b.lat, std::move(flat));
		std::vector<int> kept;
		for (std::size_t i = 0; i < super.size(); ++i)
			if (in_box(b, super.site(i))) kept.insert(kept.end(), super.site(i).begin(), super.site(i).end());
		return Region::from_flat(b.lat, std::move(kept));
	}
	}
	return Region::from_flat(b.lat, std::move(flat));
}

std::vector<std::size_t> inner_third_indices(const Box& b, const Region& region) {
	std::vector<std::size_t> out;
	for (std::size_t i = 0; i < region.size(); ++i)
		if (in_inner_third(b, region.site(i))) out.push_back(i);
	return out;
}

// ---- rectangles ----

Rect box_as_rect(const Box& b) {
	if (b.metric == Metric::Haus) throw PreconditionError("Hausdorff boxes are not rectangles");
	return Rect{b.lat, b.center, std::vector<std::int64_t>(b.lat.n, b.side), b.metric == Metric::Sym};
}

Region enumerate(const Rect& r) {
	r.lat.validate();
	if (static_cast<int>(r.sides.size()) != r.lat.n) throw PreconditionError("one side per particle required");
	int d = r.lat.d;
	std::vector<std::pair<int, int>> ext;
	for (int i = 0; i < r.lat.n; ++i) {
		if (r.sides[i] < kTicks) throw PreconditionError("rectangle sides must be >= 1");
		for (int k = 0; k < d; ++k) ext.push_back(interval(r.center[i * d + k], r.sides[i]));
	}
	std::vector<int> plain;
	append_product(ext, plain);
	if (!r.symmetrized) return Region::from_flat(r.lat, std::move(plain));
	std::vector<int> flat;
	int dim = r.lat.dim();
	std::size_t count = plain.size() / dim;
	for (const auto& pi : permutations(r.lat.n)) {
		for (std::size_t s = 0; s < count; ++s)
			for (int i = 0; i < r.lat.n; ++i)
				for (int k = 0; k < d; ++k) flat.push_back(plain[s * dim + pi[i] * d + k]);
		check_size(flat.size() / dim);
	}
	return Region::from_flat(r.lat, std::move(flat));
}

Box projection(const Rect& r, int j) {
	if (j < 0 || j >= r.lat.n) throw PreconditionError("projection index out of range");
	int d = r.lat.d;
	Point c(r.center.begin() + j * d, r.center.begin() + (j + 1) * d);
	return Box{Metric::Inf, Lattice{1, d}, c, r.sides[j]};
}

Region projection_region(const Rect& r, int j) { return enumerate(projection(r, j)); }

Region projection_region(const Rect& r) {
	Region u = projection_region(r, 0);
	for (int j = 1; j < r.lat.n; ++j) u = set_union(u, projection_region(r, j));
	return u;
}

bool boxes_intersect(const Box& a, const Box& b) {
	auto ea = box_extent(a), eb = box_extent(b);
	for (std::size_t k = 0; k < ea.size(); ++k) {
		int lo = std::max(ea[k].first, eb[k].first);
		int hi = std::min(ea[k].second, eb[k].second);
		if (lo > hi) return false;
	}
	return true;
}

// ---- boundaries ----

std::vector<std::int64_t> neighbour_table(const Region& region) {
	int dim = region.lattice().dim();
	std::vector<std::int64_t> tab(region.size() * 2 * dim, -1);
	std::vector<int> y(dim);
	for (std::size_t i = 0; i < region.size(); ++i) {
		auto s = region.site(i);
		std::copy(s.begin(), s.end(), y.begin());
		for (int k = 0; k < dim; ++k) {
			for (int sgn = 0; sgn < 2; ++sgn) {
				y[k] += sgn ? -1 : 1;
				if (auto j = region.find(y)) tab[i * 2 * dim + 2 * k + sgn] = static_cast<std::int64_t>(*j);
				y[k] = s[k];
			}
		}
	}
	return tab;
}

std::vector<std::size_t> inner_boundary_indices(const Region& region) {
	auto tab = neighbour_table(region);
	int deg = 2 * region.lattice().dim();
	std::vector<std::size_t> out;
	for (std::size_t i = 0; i < region.size(); ++i)
		for (int k = 0; k < deg; ++k)
			if (tab[i * deg + k] < 0) {
				out.push_back(i);
				break;
			}
	return out;
}

Boundary boundary_sets(const Region& inner, const Region* outer) {
	if (outer && !inner.subset_of(*outer)) throw PreconditionError("inner region is not contained in outer region");
	int dim = inner.lattice().dim();
	std::vector<std::pair<std::size_t, Site>> raw;
	std::vector<int> minus_flat, plus_flat;
	Site y(dim);
	for (std::size_t i = 0; i < inner.size(); ++i) {
		auto s = inner.site(i);
		bool on_edge = false;
		for (int k = 0; k < dim; ++k) {
			for (int sgn = 0; sgn < 2; ++sgn) {
				std::copy(s.begin(), s.end(), y.begin());
				y[k] += sgn ? -1 : 1;
				if (inner.contains(y)) continue;
				if (outer && !outer->contains(y)) continue;
				raw.emplace_back(i, y);
				plus_flat.insert(plus_flat.end(), y.begin(), y.end());
				on_edge = true;
			}
		}
		if (on_edge) minus_flat.insert(minus_flat.end(), s.begin(), s.end());
	}
	Boundary b;
	b.minus = Region::from_flat(inner.lattice(), std::move(minus_flat));
	b.plus = Region::from_flat(inner.lattice(), std::move(plus_flat));
	b.edges.reserve(raw.size());
	for (auto& [i, v] : raw) b.edges.emplace_back(i, *b.plus.find(v));
	return b;
}

// ---- covers ----

Cover partial_cover(const Box& outer, double cell_side) {
	if (outer.metric == Metric::Haus) throw PreconditionError("covers need an infinity or symmetrized box");
	Cover c;
	c.outer = outer;
	c.cell_side = to_ticks(cell_side);
	if (c.cell_side < kTicks || c.cell_side >= outer.side) throw PreconditionError("cell side must satisfy 1 <= l < L");
	if (c.cell_side % 3 != 0) throw PreconditionError("l/3 is not on the 1/6 grid");
	c.step = c.cell_side / 3 + kTicks;
	std::int64_t reach = outer.side - 2 * c.cell_side; // 2 * (L/2 - l)
	if (reach < 0) throw PreconditionError("cell side produces no cell");
	std::int64_t kmax = reach / (2 * c.step);
	int dim = outer.lat.dim();
	std::vector<std::pair<int, int>> ext(dim, {static_cast<int>(-kmax), static_cast<int>(kmax)});
	std::vector<int> offsets;
	append_product(ext, offsets);
	for (std::size_t s = 0; s < offsets.size() / dim; ++s) {
		Point y = outer.center;
		for (int k = 0; k < dim; ++k) y[k] += offsets[s * dim + k] * c.step;
		c.centers.push_back(std::move(y));
	}
	double L = outer.side_length(), l = from_ticks(c.cell_side);
	c.count_bound = std::pow(2.0 * (3.0 * L / l + 1.0), dim);
	if (!(static_cast<double>(c.centers.size()) < c.count_bound)) throw std::logic_error("cover count bound violated");

	// Cells inside the outer box and away from its inner boundary.
	std::int64_t far = 0;
	for (const auto& y : c.centers) far = std::max(far, dist_ticks(Metric::Inf, outer.lat, y, outer.center));
	bool sufficient = 2 * (far + kTicks) + c.cell_side <= outer.side;
	if (!sufficient) {
		for (std::size_t i = 0; i < c.size(); ++i) {
			Region cell = enumerate(c.cell(i));
			Site y(dim);
			for (std::size_t s = 0; s < cell.size(); ++s) {
				auto u = cell.site(s);
				if (!in_box(outer, u)) throw std::logic_error("cover cell leaves the outer box");
				for (int k = 0; k < dim; ++k)
					for (int sgn : {-1, 1}) {
						std::copy(u.begin(), u.end(), y.begin());
						y[k] += sgn;
						if (!in_box(outer, y)) throw std::logic_error("cover cell meets the inner boundary");
					}
			}
		}
	}

	// Coverage of the shrunken box by inner thirds; centers form a product set.
	Box shrunk{outer.metric, outer.lat, outer.center, outer.side - 2 * c.cell_side};
	c.uncovered = 0;
	if (shrunk.side >= 0) {
		Region core = enumerate(shrunk);
		const auto& perms = outer.metric == Metric::Sym ? permutations(outer.lat.n) : permutations(1);
		int d = outer.lat.d;
		for (std::size_t s = 0; s < core.size(); ++s) {
			Point u = to_point(core.site(s));
			bool hit = false;
			for (const auto& pi : perms) {
				Point pu = outer.metric == Metric::Sym ? permute(u, pi, d) : u;
				bool ok = true;
				for (int k = 0; k < dim && ok; ++k) {
					std::int64_t off = pu[k] - outer.center[k];
					std::int64_t kk = std::clamp<std::int64_t>(
					    floor_div(2 * off + c.step, 2 * c.step), -kmax, kmax);
					std::int64_t best = std::abs(off - kk * c.step);
					for (std::int64_t alt : {kk - 1, kk + 1})
						if (alt >= -kmax && alt <= kmax) best = std::min(best, std::abs(off - alt * c.step));
					ok = 6 * best <= c.cell_side;
				}
				if (ok) {
					hit = true;
					break;
				}
			}
			if (!hit) ++c.uncovered;
		}
	}
	c.coverage = c.uncovered == 0;
	return c;
}

std::vector<std::size_t> neighbour_cells(const Cover& c, std::size_t i) {
	std::vector<std::size_t> out;
	for (std::size_t j = 0; j < c.size(); ++j)
		if (dist_ticks(Metric::Inf, c.outer.lat, c.centers[i], c.centers[j]) == c.step) out.push_back(j);
	return out;
}

// ---- interaction and separation ----

bool is_interactive(std::span<const int> site, int d, int r0) {
	int gap = 0;
	for (int k = 0; k < d; ++k) gap = std::max(gap, std::abs(site[k] - site[d + k]));
	return gap <= r0;
}

bool is_interactive(const Region& region, int r0) {
	if (region.lattice().n != 2) throw PreconditionError("interactivity is defined for n = 2");
	for (std::size_t i = 0; i < region.size(); ++i)
		if (is_interactive(region.site(i), region.lattice().d, r0)) return true;
	return false;
}

std::string to_string(Separation s) {
	switch (s) {
	case Separation::Fully: return "fully";
	case Separation::Partially: return "partially";
	case Separation::Neither: return "neither";
	}
	return "?";
}

Separation separation_class(const Rect& a, const Rect& b) {
	if (a.lat.n != 2 || b.lat.n != 2) throw PreconditionError("separation is defined for n = 2");
	Box pa[2] = {projection(a, 0), projection(a, 1)};
	Box pb[2] = {projection(b, 0), projection(b, 1)};
	bool meets[2][2];
	bool any = false;
	for (int i = 0; i < 2; ++i)
		for (int j = 0; j < 2; ++j) any |= (meets[i][j] = boxes_intersect(pa[i], pb[j]));
	if (!any) return Separation::Fully;
	for (int i = 0; i < 2; ++i) {
		if (!meets[i][0] && !meets[i][1]) return Separation::Partially;
		if (!meets[0][i] && !meets[1][i]) return Separation::Partially;
	}
	return Separation::Neither;
}

Separation separation_class(const Box& a, const Box& b) { return separation_class(box_as_rect(a), box_as_rect(b)); }

bool is_L_distant(const Box& a, const Box& b) {
	if (a.side != b.side) throw PreconditionError("L-distance needs equal sides");
	return dist_ticks(Metric::Sym, a.lat, a.center, b.center) > 8 * a.side;
}

} // namespace lab::geometry
