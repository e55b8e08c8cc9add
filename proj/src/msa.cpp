#include "lab/msa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"

namespace lab::msa {

using geometry::Box;
using geometry::Metric;
using geometry::Point;
using geometry::Region;
using spectral::BoxAnalysis;
using spectral::ClassificationParams;

// ---- schedule and thresholds ----

void ScaleSchedule::validate() const {
	auto need = [](bool ok, const char* what) {
		if (!ok) throw ConfigError(std::string("schedule: ") + what);
	};
	need(L0 >= 1, "L0 >= 1");
	need(J >= 0, "J >= 0");
	if (mode == ScaleMode::Multiplicative) need(Y > 1, "Y > 1");
	need(0 < zeta && zeta < tau && tau < 1, "0 < zeta < tau < 1");
	need(gamma > 1, "gamma > 1");
	need(zeta < zeta2, "zeta < zeta2");
	need(gamma * zeta2 < zeta1, "gamma*zeta2 < zeta1");
	need(gamma * zeta1 < beta, "gamma*zeta1 < beta");
	need(beta < zeta0, "beta < zeta0");
	need(zeta0 < tau, "zeta0 < tau");
	need(zeta * gamma * gamma < zeta2, "zeta*gamma^2 < zeta2");
	need(kappa > 0 && kappa < std::min({gamma - 1, gamma * (1 - beta), 1.0}),
	     "0 < kappa < min(gamma-1, gamma(1-beta), 1)");
}

double ScaleSchedule::scale(int k) const {
	if (mode == ScaleMode::Multiplicative) return L0 * std::pow(Y, k);
	return std::round(std::pow(L0, std::pow(gamma, k)));
}

void MSAThresholds::validate() const {
	auto need = [](bool ok, const char* what) {
		if (!ok) throw ConfigError(std::string("thresholds: ") + what);
	};
	need(theta > 0, "theta > 0");
	need(p > 0, "p > 0");
	need(p0 >= 0 && p0 < 1, "0 <= p0 < 1");
	need(E1 > E2 && E2 > 0, "E1 > E2 > 0");
	need(m_star > 0, "m_star > 0");
	need(s > 0, "s > 0");
	need(beta > 0 && beta < 1, "0 < beta < 1");
	need(kappa > 0, "kappa > 0");
}

double MSAThresholds::m_of_L(double L, int d) const {
	return m_star - 1 / (2 * std::pow(L, kappa)) - 6.0 * (d + 1) * std::log(2 * L) / L;
}

ClassificationParams MSAThresholds::params() const {
	ClassificationParams q;
	q.theta = theta;
	q.s = s;
	q.beta = beta;
	q.m = m_star;
	return q;
}

double theorem_p0(double Y, int d) { return std::pow(6 * Y + 2, -4.0 * d); }

// ---- cover classification ----

std::vector<CellVerdict> classify_cover(const geometry::Cover& cover, const model::DisorderField& field,
                                        const model::ModelSpec& spec, double E, const ClassificationParams& p) {
	std::vector<CellVerdict> out;
	out.reserve(cover.size());
	for (std::size_t i = 0; i < cover.size(); ++i) {
		CellVerdict c;
		c.box = cover.cell(i);
		BoxAnalysis a(c.box, field, spec);
		c.verdict = a.verdict(E, p);
		c.interactive = geometry::is_interactive(a.region(), spec.interaction.r0);
		c.bad = !c.verdict.suitable;
		out.push_back(std::move(c));
	}
	return out;
}

// ---- maximum distant set ----

namespace {

struct MISSearch {
	const std::vector<std::vector<char>>& conflict;
	std::size_t budget;
	std::size_t nodes = 0;
	bool exhausted = false;
	std::vector<std::size_t> best, chosen;

	// Greedy clique cover of the candidates bounds any independent subset.
	std::size_t clique_bound(const std::vector<std::size_t>& cand) const {
		std::vector<std::vector<std::size_t>> cliques;
		for (auto v : cand) {
			bool placed = false;
			for (auto& q : cliques) {
				if (std::all_of(q.begin(), q.end(), [&](std::size_t w) { return conflict[v][w]; })) {
					q.push_back(v);
					placed = true;
					break;
				}
			}
			if (!placed) cliques.push_back({v});
		}
		return cliques.size();
	}

	void run(const std::vector<std::size_t>& cand) {
		if (exhausted) return;
		if (++nodes > budget) {
			exhausted = true;
			return;
		}
		if (cand.empty()) {
			if (chosen.size() > best.size()) best = chosen;
			return;
		}
		if (chosen.size() + cand.size() <= best.size()) return;
		if (chosen.size() + clique_bound(cand) <= best.size()) return;
		// some maximum set contains v or one of its conflicting candidates
		std::size_t v = cand[0], vdeg = cand.size() + 1;
		for (auto a : cand) {
			std::size_t deg = 0;
			for (auto b : cand) deg += (a != b && conflict[a][b]);
			if (deg < vdeg) {
				vdeg = deg;
				v = a;
			}
		}
		std::vector<std::size_t> branch{v};
		for (auto b : cand)
			if (b != v && conflict[v][b]) branch.push_back(b);
		for (auto w : branch) {
			std::vector<std::size_t> next;
			for (auto b : cand)
				if (b != w && !conflict[w][b]) next.push_back(b);
			chosen.push_back(w);
			run(next);
			chosen.pop_back();
			if (exhausted) return;
		}
	}
};

} // namespace

DistantSet max_distant_set(const std::vector<Point>& centers, const geometry::Lattice& lat, std::int64_t min_ticks,
                           std::size_t budget) {
	std::size_t n = centers.size();
	std::vector<std::vector<char>> conflict(n, std::vector<char>(n, 0));
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = i + 1; j < n; ++j)
			conflict[i][j] = conflict[j][i] =
			    geometry::dist_ticks(Metric::Sym, lat, centers[i], centers[j]) <= min_ticks;
	MISSearch s{conflict, budget, 0, false, {}, {}};
	std::vector<std::size_t> all(n);
	for (std::size_t i = 0; i < n; ++i) all[i] = i;
	s.run(all);
	DistantSet r;
	r.size = s.best.size();
	r.exact = !s.exhausted;
	r.nodes = s.nodes;
	r.members = s.best;
	std::sort(r.members.begin(), r.members.end());
	return r;
}

DistantSet max_distant_bad_set(const std::vector<CellVerdict>& cells, double ell, std::size_t budget) {
	std::vector<Point> centers;
	std::vector<std::size_t> index;
	for (std::size_t i = 0; i < cells.size(); ++i)
		if (cells[i].bad) {
			centers.push_back(cells[i].box.center);
			index.push_back(i);
		}
	if (centers.empty()) return {};
	auto r = max_distant_set(centers, cells[index[0]].box.lat, 8 * geometry::to_ticks(ell), budget);
	for (auto& m : r.members) m = index[m];
	return r;
}

// ---- deterministic step ----

StepMargins step_margins(int d, double ell, double Y, int J, double theta, double s, std::size_t boundary,
                         bool coverage) {
	StepMargins m;
	double N = Y / 2 - 3 - 28.0 * J;
	double B = static_cast<double>(boundary);
	double lL = std::log(Y * ell), ll = std::log(ell);
	m.boundary = boundary;
	m.margin1 = (2.0 * d - 1 - theta) * N + s + theta;
	m.log_margin2 = 2 * std::log(B) + s * lL - theta * ll;
	m.log_margin3 = N * (std::log(B) - theta * ll) + (s + theta) * lL;
	m.coverage = coverage;
	m.ok = N >= 2 && m.margin1 < 0 && m.log_margin2 <= 0 && m.log_margin3 <= 0 && coverage;
	return m;
}

Box step_field_box(const Box& box, double ell, int J) {
	Box b = box;
	b.side += J * geometry::to_ticks(8 * ell + 1);
	return b;
}

StepReport deterministic_step_check(const Box& box, double ell, const model::DisorderField& field,
                                    const model::ModelSpec& spec, double E, const ClassificationParams& p, int J) {
	if (box.lat.n != 2 || box.metric != Metric::Sym) throw PreconditionError("needs a symmetrized two-particle box");
	int d = box.lat.d;
	if (J < 0) throw PreconditionError("J must be nonnegative");
	if (!(p.theta > 4.0 * d - 2 + p.s)) throw PreconditionError("parameter gate: theta > 4d-2+s fails");
	StepReport r;
	r.ell = ell;
	r.L = box.side_length();
	r.Y = r.L / ell;
	r.J = J;
	if (!(r.Y >= 10 + 56.0 * J)) throw PreconditionError("parameter gate: Y >= 10+56J fails");

	auto cover = geometry::partial_cover(box, ell);
	r.cover = classify_cover(cover, field, spec, E, p);
	r.cells = r.cover.size();
	std::size_t B = 0;
	for (const auto& c : r.cover) {
		r.bad_cells += c.bad;
		r.interactive_cells += c.interactive;
		B = std::max(B, geometry::boundary_sets(geometry::enumerate(c.box)).edges.size());
	}
	r.margins = step_margins(d, ell, r.Y, J, p.theta, p.s, B, cover.coverage);

	BoxAnalysis big(box, field, spec);
	auto db = big.spectrum_distance(E);
	if (!db.exact && db.value < std::pow(r.L, -p.s) && big.spectrum_available())
		db = {spectral::dist_to_spectrum(big.spectrum(), E), true};
	r.hyp_nonresonant = !spectral::make_margins(db.value, db.exact, r.L, p).suitably_resonant;

	r.distant = max_distant_bad_set(r.cover, ell);
	r.hyp_budget = r.distant.exact && r.distant.size <= static_cast<std::size_t>(J);

	r.hyp_sub_boxes = true;
	for (int j = 1; j <= J && r.hyp_sub_boxes; ++j)
		for (const auto& c : cover.centers) {
			Box sub{Metric::Sym, box.lat, c, j * geometry::to_ticks(8 * ell + 1)};
			if (spectral::resonance_status(sub, field, spec, E, p).suitably_resonant) {
				r.hyp_sub_boxes = false;
				break;
			}
		}

	r.hypotheses = r.hyp_nonresonant && r.hyp_budget && r.hyp_sub_boxes;
	r.verdict = big.verdict(E, p);
	r.conclusion = r.verdict.suitable;
	r.asserted = r.hypotheses && r.margins.ok;
	r.violation = r.asserted && !r.conclusion;
	return r;
}

nlohmann::json to_json(const StepMargins& m) {
	return {{"margin1", m.margin1},         {"boundary", m.boundary}, {"log_margin2", m.log_margin2},
	        {"log_margin3", m.log_margin3}, {"coverage", m.coverage}, {"ok", m.ok}};
}

nlohmann::json to_json(const StepReport& r, bool with_cells) {
	nlohmann::json j = {{"ell", r.ell},
	                    {"L", r.L},
	                    {"Y", r.Y},
	                    {"J", r.J},
	                    {"margins", to_json(r.margins)},
	                    {"hypotheses",
	                     {{"nonresonant", r.hyp_nonresonant},
	                      {"bad_budget", r.hyp_budget},
	                      {"sub_boxes", r.hyp_sub_boxes},
	                      {"all", r.hypotheses}}},
	                    {"conclusion", r.conclusion},
	                    {"asserted", r.asserted},
	                    {"violation", r.violation},
	                    {"cells", r.cells},
	                    {"bad_cells", r.bad_cells},
	                    {"interactive_cells", r.interactive_cells},
	                    {"distant_bad", {{"size", r.distant.size}, {"exact", r.distant.exact}}},
	                    {"verdict", spectral::to_json(r.verdict)}};
	if (with_cells) {
		nlohmann::json cells = nlohmann::json::array();
		for (const auto& c : r.cover)
			cells.push_back({{"center", c.box.center},
			                 {"interactive", c.interactive},
			                 {"bad", c.bad},
			                 {"verdict", spectral::to_json(c.verdict)}});
		j["cover"] = cells;
	}
	return j;
}

// ---- probability tracking ----

ScaleRow estimate_nonsuitable_prob(const model::ModelSpec& spec, double theta, double E, double L,
                                   const std::vector<Point>& centers, std::size_t trials, std::uint64_t seed,
                                   unsigned workers) {
	if (trials == 0) throw PreconditionError("need at least one trial");
	if (centers.empty()) throw PreconditionError("need at least one center");
	Metric kind = spec.lattice.n == 1 ? Metric::Inf : Metric::Sym;
	ClassificationParams p;
	p.theta = theta;
	std::vector<Box> boxes;
	std::vector<Region> support;
	ScaleRow row;
	row.L = L;
	for (const auto& c : centers) {
		boxes.push_back(Box{kind, spec.lattice, c, geometry::to_ticks(L)});
		Region reg = geometry::enumerate(boxes.back());
		row.sites = std::max(row.sites, reg.size());
		support.push_back(model::particle_support(reg));
	}
	std::vector<std::vector<char>> bad(trials, std::vector<char>(centers.size(), 0));
	parallel_for(trials, workers, [&](std::size_t t) {
		auto s = rng::trial_seed(seed, t);
		for (std::size_t c = 0; c < boxes.size(); ++c) {
			auto field = model::sample_disorder(spec, support[c], s);
			bad[t][c] = !BoxAnalysis(boxes[c], field, spec).verdict(E, p).suitable;
		}
	});
	for (std::size_t c = 0; c < centers.size(); ++c) {
		CenterEstimate e;
		e.center = centers[c];
		e.trials = trials;
		for (std::size_t t = 0; t < trials; ++t) e.hits += bad[t][c];
		e.p_hat = static_cast<double>(e.hits) / static_cast<double>(trials);
		e.ci = estimates::clopper_pearson(e.hits, trials);
		row.p_max = std::max(row.p_max, e.p_hat);
		row.ci_hi_max = std::max(row.ci_hi_max, e.ci.hi);
		row.centers.push_back(e);
	}
	return row;
}

double recursion_bound(double L_next, double p, double Y, int d, int J, double p_k) {
	return 0.5 * (std::pow(L_next, -p) + std::pow(std::pow(6 * Y + 2, 2.0 * d) * p_k, J + 1));
}

RecursionTrace run_scale_recursion(const ScaleSchedule& schedule, const MSAThresholds& th,
                                   const model::ModelSpec& spec, double E, int k_max,
                                   const std::vector<std::vector<double>>& centers_in_L, std::size_t trials,
                                   std::uint64_t seed, unsigned workers) {
	schedule.validate();
	th.validate();
	if (k_max < 0) throw ConfigError("k_max must be nonnegative");
	if (centers_in_L.empty()) throw ConfigError("need at least one center");
	int dim = spec.lattice.dim(), d = spec.lattice.d;
	for (const auto& c : centers_in_L)
		if (static_cast<int>(c.size()) != dim) throw ConfigError("center dimension differs from n*d");
	Metric kind = spec.lattice.n == 1 ? Metric::Inf : Metric::Sym;

	RecursionTrace tr;
	tr.p0_theorem = theorem_p0(schedule.Y, d);
	tr.relaxed = th.p0 > 0;
	tr.p0_used = tr.relaxed ? th.p0 : tr.p0_theorem;
	for (int k = 0; k <= k_max; ++k) {
		double L = schedule.scale(k);
		std::vector<Point> centers;
		for (const auto& c : centers_in_L) {
			Point pt(dim);
			for (int i = 0; i < dim; ++i) pt[i] = std::llround(c[i] * L) * geometry::kTicks;
			centers.push_back(pt);
		}
		std::size_t sites = geometry::enumerate(Box{kind, spec.lattice, centers[0], geometry::to_ticks(L)}).size();
		if (sites > spectral::kDenseCeiling) {
			tr.truncated = true;
			tr.truncation_note = "scale " + std::to_string(k) + ": box of " + std::to_string(sites) +
			                     " sites exceeds the dense ceiling";
			break;
		}
		auto row = estimate_nonsuitable_prob(spec, th.theta, E, L, centers, trials, rng::derive(seed, k), workers);
		row.k = k;
		if (k > 0) {
			const auto& prev = tr.rows.back();
			row.overlay = recursion_bound(L, th.p, L / prev.L, d, schedule.J, prev.p_max);
		}
		tr.rows.push_back(std::move(row));
	}
	if (!tr.rows.empty()) tr.p0_gate = tr.rows[0].p_max <= tr.p0_used;
	tr.nonincreasing = true;
	for (std::size_t k = 1; k < tr.rows.size(); ++k)
		if (tr.rows[k].p_max > tr.rows[k - 1].p_max) tr.nonincreasing = false;
	return tr;
}

std::string RecursionTrace::csv() const {
	std::ostringstream os;
	os << "k,L,center,hits,trials,p_hat,ci_lo,ci_hi,overlay\n";
	char buf[256];
	for (const auto& r : rows)
		for (const auto& c : r.centers) {
			std::string ctr;
			for (auto t : c.center) {
				std::snprintf(buf, sizeof buf, "%.17g", geometry::from_ticks(t));
				ctr += (ctr.empty() ? "" : ";") + std::string(buf);
			}
			std::snprintf(buf, sizeof buf, "%d,%.17g,%s,%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", r.k, r.L, ctr.c_str(),
			              c.hits, c.trials, c.p_hat, c.ci.lo, c.ci.hi, r.overlay);
			os << buf;
		}
	return os.str();
}

nlohmann::json RecursionTrace::summary() const {
	nlohmann::json rs = nlohmann::json::array();
	for (const auto& r : rows)
		rs.push_back({{"k", r.k},
		              {"L", r.L},
		              {"sites", r.sites},
		              {"p_max", r.p_max},
		              {"ci_hi_max", r.ci_hi_max},
		              {"overlay", r.overlay < 0 ? nlohmann::json(nullptr) : nlohmann::json(r.overlay)}});
	return {{"rows", rs},
	        {"truncated", truncated},
	        {"truncation_note", truncation_note},
	        {"p0_theorem", p0_theorem},
	        {"p0_used", p0_used},
	        {"p0_label", relaxed ? "relaxed" : "theorem"},
	        {"p0_gate", p0_gate},
	        {"nonincreasing", nonincreasing}};
}

// ---- preregularity ----

namespace {

// Cells of a one-particle cover whose shifted verdicts fail regularity, for each shift.
bool side_regular(const std::vector<BoxAnalysis>& cells, const std::vector<Box>& boxes, const Eigen::VectorXd& mus,
                  double E, double E1, const ClassificationParams& q, std::size_t& shifts) {
	for (Eigen::Index j = 0; j < mus.size() && mus[j] <= E1; ++j) {
		++shifts;
		std::vector<std::size_t> bad;
		for (std::size_t i = 0; i < cells.size(); ++i)
			if (!cells[i].verdict(E - mus[j], q).regular_at(q.m)) bad.push_back(i);
		for (std::size_t a = 0; a < bad.size(); ++a)
			for (std::size_t b = a + 1; b < bad.size(); ++b)
				if (!geometry::boxes_intersect(boxes[bad[a]], boxes[bad[b]])) return false;
	}
	return true;
}

bool side_nonresonant(const std::vector<Eigen::VectorXd>& spectra, double ell9, const Eigen::VectorXd& mus, double E,
                      double E1, const ClassificationParams& q) {
	for (Eigen::Index j = 0; j < mus.size() && mus[j] <= E1; ++j)
		for (const auto& sp : spectra)
			if (spectral::make_margins(spectral::dist_to_spectrum(sp, E - mus[j]), true, ell9, q).resonant)
				return false;
	return true;
}

bool inside(const Box& inner, const Box& outer) {
	auto a = geometry::box_extent(inner), b = geometry::box_extent(outer);
	for (std::size_t k = 0; k < a.size(); ++k)
		if (a[k].first < b[k].first || a[k].second > b[k].second) return false;
	return true;
}

} // namespace

PreregReport preregularity_classify(const Box& box, double ell, const model::DisorderField& field,
                                    const model::ModelSpec& spec, double E, const MSAThresholds& th) {
	if (box.lat.n != 2 || box.metric != Metric::Sym) throw PreconditionError("needs a symmetrized two-particle box");
	th.validate();
	if (!(E <= th.E2)) throw PreconditionError("needs E <= E2");
	Region region = geometry::enumerate(box);
	if (geometry::is_interactive(region, spec.interaction.r0)) throw PreconditionError("box is interactive");
	int d = box.lat.d;
	auto one = spec.one_particle();
	geometry::Lattice l1{1, d};
	Box b1{Metric::Inf, l1, Point(box.center.begin(), box.center.begin() + d), box.side};
	Box b2{Metric::Inf, l1, Point(box.center.begin() + d, box.center.end()), box.side};
	BoxAnalysis a1(b1, field, one), a2(b2, field, one);
	const auto& sig1 = a1.spectrum();
	const auto& sig2 = a2.spectrum();

	ClassificationParams q = th.params();
	double ell9 = 9 * ell;
	auto side = [&](const Box& b, const Eigen::VectorXd& mus, bool& regular, bool& nonresonant, std::size_t& shifts) {
		auto cover = geometry::partial_cover(b, ell);
		std::vector<BoxAnalysis> cells;
		std::vector<Box> boxes;
		std::vector<Eigen::VectorXd> spectra9;
		for (std::size_t i = 0; i < cover.size(); ++i) {
			boxes.push_back(cover.cell(i));
			cells.emplace_back(boxes.back(), field, one);
			Box big{Metric::Inf, l1, cover.centers[i], geometry::to_ticks(ell9)};
			if (inside(big, b))
				spectra9.push_back(spectral::eigenvalues(model::assemble(geometry::enumerate(big), field, one)));
		}
		regular = side_regular(cells, boxes, mus, E, th.E1, q, shifts);
		nonresonant = side_nonresonant(spectra9, ell9, mus, E, th.E1, q);
	};

	PreregReport r;
	side(b1, sig2, r.Lregular, r.LNR, r.shifts_left);
	side(b2, sig1, r.Rregular, r.RNR, r.shifts_right);
	r.preregular = r.Lregular && r.Rregular;
	r.HNR = r.LNR && r.RNR;
	r.m_L = th.m_of_L(box.side_length(), d);
	ClassificationParams p2 = q;
	p2.m = r.m_L;
	BoxAnalysis two(box, field, spec);
	if (static_cast<std::size_t>(2 * sig1.size() * sig2.size()) == region.size()) {
		// two disjoint copies of the tensor block
		Eigen::VectorXd sum(2 * sig1.size() * sig2.size());
		Eigen::Index k = 0;
		for (double a : sig1)
			for (double b : sig2) sum[k++] = a + b, sum[k++] = a + b;
		std::sort(sum.begin(), sum.end());
		two.assume_spectrum(std::move(sum));
	}
	r.verdict = two.verdict(E, p2);
	r.conclusion = r.verdict.regular_at(r.m_L);
	r.asserted = r.HNR && r.preregular && r.m_L > 0;
	r.violation = r.asserted && !r.conclusion;
	return r;
}

nlohmann::json to_json(const PreregReport& r) {
	return {{"Lregular", r.Lregular},
	        {"Rregular", r.Rregular},
	        {"preregular", r.preregular},
	        {"LNR", r.LNR},
	        {"RNR", r.RNR},
	        {"HNR", r.HNR},
	        {"m_L", r.m_L},
	        {"conclusion", r.conclusion},
	        {"asserted", r.asserted},
	        {"violation", r.violation},
	        {"shifts", {r.shifts_left, r.shifts_right}},
	        {"verdict", spectral::to_json(r.verdict)}};
}

// ---- event R ----

namespace {

struct EventRSetup {
	Box bx, by;
	Region support;
	std::vector<double> grid;
};

EventRSetup event_R_setup(const model::ModelSpec& spec, double I_lo, double I_hi, const Point& x, const Point& y,
                          double L) {
	if (spec.lattice.n != 2) throw PreconditionError("event R is defined for two particles");
	if (!(I_lo <= I_hi)) throw PreconditionError("empty energy interval");
	EventRSetup s;
	s.bx = Box{Metric::Sym, spec.lattice, x, geometry::to_ticks(L)};
	s.by = Box{Metric::Sym, spec.lattice, y, geometry::to_ticks(L)};
	if (geometry::separation_class(s.bx, s.by) == geometry::Separation::Neither)
		throw PreconditionError("boxes are not partially separated");
	s.support = model::particle_support(geometry::set_union(geometry::enumerate(s.bx), geometry::enumerate(s.by)));
	constexpr int kGrid = 64;
	for (int i = 0; i < kGrid; ++i) s.grid.push_back(I_lo + (I_hi - I_lo) * i / (kGrid - 1));
	return s;
}

bool event_R_on(const EventRSetup& s, const model::ModelSpec& spec, double m, double I_lo, double I_hi,
                std::uint64_t trial_seed) {
	ClassificationParams q;
	q.m = m;
	auto field = model::sample_disorder(spec, s.support, trial_seed);
	BoxAnalysis ax(s.bx, field, spec), ay(s.by, field, spec);
	std::vector<double> energies = s.grid;
	for (const auto* a : {&ax, &ay})
		for (double e : a->spectrum())
			if (e >= I_lo && e <= I_hi) energies.push_back(e);
	std::sort(energies.begin(), energies.end());
	for (double E : energies) {
		if (ax.verdict(E, q).regular_at(m)) continue;
		if (!ay.verdict(E, q).regular_at(m)) return true;
	}
	return false;
}

} // namespace

bool event_R_trial(const model::ModelSpec& spec, double m, double I_lo, double I_hi, const Point& x, const Point& y,
                   double L, std::uint64_t trial_seed) {
	return event_R_on(event_R_setup(spec, I_lo, I_hi, x, y, L), spec, m, I_lo, I_hi, trial_seed);
}

EventRResult estimate_event_R(const model::ModelSpec& spec, double m, double I_lo, double I_hi, const Point& x,
                              const Point& y, double L, double zeta2, std::size_t trials, std::uint64_t seed,
                              unsigned workers) {
	auto s = event_R_setup(spec, I_lo, I_hi, x, y, L);
	if (trials == 0) throw PreconditionError("need at least one trial");
	EventRResult res;
	res.energies = s.grid.size();
	res.occurred.assign(trials, 0);
	parallel_for(trials, workers,
	             [&](std::size_t t) { res.occurred[t] = event_R_on(s, spec, m, I_lo, I_hi, rng::trial_seed(seed, t)); });
	std::size_t hits = 0;
	for (int o : res.occurred) hits += o;
	res.overlay = std::exp(-std::pow(L, zeta2));
	res.report = estimates::make_report(0, hits, trials, res.overlay);
	return res;
}

} // namespace lab::msa
