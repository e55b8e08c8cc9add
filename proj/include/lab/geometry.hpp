#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lab::geometry {

// Centers and side lengths live on the grid (1/6)Z. One tick = 1/6.
inline constexpr std::int64_t kTicks = 6;

// Largest n*d accepted anywhere.
inline constexpr int kMaxDim = 8;

// Largest region produced by any enumeration.
inline constexpr std::size_t kMaxRegion = 4'000'000;

struct Lattice {
	int n = 1;
	int d = 1;

	int dim() const { return n * d; }
	void validate() const;
	bool operator==(const Lattice&) const = default;
};

enum class Metric { Inf, Sym, Haus };

Metric parse_metric(const std::string& s);
std::string to_string(Metric m);

using Site = std::vector<int>;
using Point = std::vector<std::int64_t>;

Point to_point(std::span<const int> site);
// Exact conversion; every value must be a multiple of 1/6.
Point make_point(std::initializer_list<double> coords);
Point make_point(const std::vector<double>& coords);
std::int64_t to_ticks(double length);
double from_ticks(std::int64_t t);

// Distances in ticks between points of the same lattice.
std::int64_t dist_ticks(Metric m, const Lattice& lat, std::span<const std::int64_t> a,
                        std::span<const std::int64_t> b);
double distance(Metric m, const Lattice& lat, const Point& a, const Point& b);
int site_distance(Metric m, const Lattice& lat, std::span<const int> a, std::span<const int> b);

// <t> = sqrt(1 + t^2)
double japanese(double t);

// All permutations of {0..n-1} in lexicographic order.
const std::vector<std::vector<int>>& permutations(int n);

// Sorted set of lattice sites, stored flat.
class Region {
public:
	Region() = default;
	explicit Region(Lattice lat) : lat_(lat) {}
	// Sorts and removes duplicates.
	static Region from_flat(Lattice lat, std::vector<int> coords);
	static Region from_sites(Lattice lat, const std::vector<Site>& sites);

	const Lattice& lattice() const { return lat_; }
	std::size_t size() const { return lat_.dim() ? coords_.size() / lat_.dim() : 0; }
	bool empty() const { return coords_.empty(); }
	std::span<const int> site(std::size_t i) const {
		return {coords_.data() + i * lat_.dim(), static_cast<std::size_t>(lat_.dim())};
	}
	Site site_vec(std::size_t i) const;
	std::optional<std::size_t> find(std::span<const int> s) const;
	bool contains(std::span<const int> s) const { return find(s).has_value(); }
	const std::vector<int>& flat() const { return coords_; }

	bool subset_of(const Region& other) const;
	bool operator==(const Region& other) const { return lat_ == other.lat_ && coords_ == other.coords_; }

	// "n d count" header then one site per line.
	std::string dump() const;
	static Region parse(const std::string& text);

private:
	Lattice lat_{};
	std::vector<int> coords_;
};

Region set_union(const Region& a, const Region& b);
Region set_difference(const Region& a, const Region& b);
Region set_intersection(const Region& a, const Region& b);

struct Box {
	Metric metric = Metric::Inf;
	Lattice lat{};
	Point center;
	std::int64_t side = 0; // ticks

	double side_length() const { return from_ticks(side); }
};

Box make_box(Metric m, Lattice lat, Point center, double side);

// dist(center, y) <= L/2
bool in_box(const Box& b, std::span<const int> y);
// dist(center, y) <= L/6
bool in_inner_third(const Box& b, std::span<const int> y);

Region enumerate(const Box& b);
// Indices into enumerate(b) of the inner third.
std::vector<std::size_t> inner_third_indices(const Box& b, const Region& region);

struct Rect {
	Lattice lat{};
	Point center;
	std::vector<std::int64_t> sides; // ticks, one per particle
	bool symmetrized = false;
};

Rect box_as_rect(const Box& b);
Region enumerate(const Rect& r);
// Pi_j of the plain rectangle: the one-particle box of side L_j at x_j.
Box projection(const Rect& r, int j);
Region projection_region(const Rect& r, int j);
Region projection_region(const Rect& r);

// Integer interval [lo, hi] per coordinate of an infinity box.
std::vector<std::pair<int, int>> box_extent(const Box& b);
bool boxes_intersect(const Box& a, const Box& b); // both infinity boxes

struct Boundary {
	// (index in inner, index in plus)
	std::vector<std::pair<std::size_t, std::size_t>> edges;
	Region minus;
	Region plus;
};

// outer == nullptr means the whole lattice.
Boundary boundary_sets(const Region& inner, const Region* outer = nullptr);
// Indices of the inner vertex boundary relative to the whole lattice.
std::vector<std::size_t> inner_boundary_indices(const Region& region);

// Flat neighbour table: entry i*2D+k is the index of the k-th neighbour or -1.
std::vector<std::int64_t> neighbour_table(const Region& region);

struct Cover {
	Box outer;
	std::int64_t cell_side = 0; // ticks
	std::int64_t step = 0;      // ticks, l/3 + 1
	std::vector<Point> centers;
	double count_bound = 0;     // (2(3L/l+1))^{nd}
	bool coverage = false;      // shrunken box covered by inner thirds
	std::size_t uncovered = 0;

	Box cell(std::size_t i) const { return Box{outer.metric, outer.lat, centers[i], cell_side}; }
	std::size_t size() const { return centers.size(); }
};

Cover partial_cover(const Box& outer, double cell_side);
// Indices of centers at infinity distance exactly l/3+1 (neighbour cells).
std::vector<std::size_t> neighbour_cells(const Cover& c, std::size_t i);

bool is_interactive(const Region& region, int r0);
bool is_interactive(std::span<const int> site, int d, int r0);

enum class Separation { Fully, Partially, Neither };
std::string to_string(Separation s);

Separation separation_class(const Rect& a, const Rect& b);
Separation separation_class(const Box& a, const Box& b);
bool is_L_distant(const Box& a, const Box& b);

} // namespace lab::geometry
