#include "lab/harness.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "lab/audit.hpp"
#include "lab/errors.hpp"
#include "lab/estimates.hpp"
#include "lab/localization.hpp"
#include "lab/msa.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"
#include "lab/spectral.hpp"
#include "lab/transport.hpp"

#ifndef LAB_VERSION
#define LAB_VERSION "0.0.0"
#endif

namespace lab::harness {

using geometry::Box;
using geometry::Metric;
using geometry::Point;
using geometry::Rect;
using geometry::Region;
using nlohmann::json;

std::string code_version() { return LAB_VERSION; }

std::string sha256_hex(const std::string& data) {
	unsigned char md[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
	std::ostringstream os;
	for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
	return os.str();
}

// ---- schema helpers ----

void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

Fields::Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
	if (!j_.is_object()) fail(path_, "expected an object");
}

bool Fields::has(const std::string& key) const { return j_.contains(key); }

const json& Fields::get(const std::string& key) const {
	if (!j_.contains(key)) fail(at(key), "missing required field");
	used_.insert(key);
	return j_.at(key);
}

double Fields::number(const std::string& key) const {
	const auto& v = get(key);
	if (!v.is_number()) fail(at(key), "expected a number");
	return v.get<double>();
}

double Fields::number(const std::string& key, double dflt) const { return has(key) ? number(key) : dflt; }

std::int64_t Fields::integer(const std::string& key) const {
	const auto& v = get(key);
	if (!v.is_number_integer()) fail(at(key), "expected an integer");
	return v.get<std::int64_t>();
}

std::int64_t Fields::integer(const std::string& key, std::int64_t dflt) const {
	return has(key) ? integer(key) : dflt;
}

bool Fields::boolean(const std::string& key, bool dflt) const {
	if (!has(key)) return dflt;
	const auto& v = get(key);
	if (!v.is_boolean()) fail(at(key), "expected true or false");
	return v.get<bool>();
}

std::string Fields::string(const std::string& key) const {
	const auto& v = get(key);
	if (!v.is_string()) fail(at(key), "expected a string");
	return v.get<std::string>();
}

std::string Fields::string(const std::string& key, const std::string& dflt) const {
	return has(key) ? string(key) : dflt;
}

std::vector<double> Fields::numbers(const std::string& key) const {
	const auto& v = get(key);
	if (!v.is_array()) fail(at(key), "expected an array of numbers");
	std::vector<double> out;
	for (std::size_t i = 0; i < v.size(); ++i) {
		if (!v[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
		out.push_back(v[i].get<double>());
	}
	return out;
}

std::vector<double> Fields::numbers(const std::string& key, const std::vector<double>& dflt) const {
	return has(key) ? numbers(key) : dflt;
}

std::vector<std::vector<double>> Fields::rows(const std::string& key) const {
	const auto& v = get(key);
	if (!v.is_array()) fail(at(key), "expected an array of arrays");
	std::vector<std::vector<double>> out;
	for (std::size_t i = 0; i < v.size(); ++i) {
		std::string p = at(key) + "[" + std::to_string(i) + "]";
		if (!v[i].is_array()) fail(p, "expected an array of numbers");
		std::vector<double> row;
		for (std::size_t k = 0; k < v[i].size(); ++k) {
			if (!v[i][k].is_number()) fail(p + "[" + std::to_string(k) + "]", "expected a number");
			row.push_back(v[i][k].get<double>());
		}
		out.push_back(std::move(row));
	}
	return out;
}

Fields Fields::object(const std::string& key) const { return Fields(get(key), at(key)); }

void Fields::finish() const {
	for (auto it = j_.begin(); it != j_.end(); ++it)
		if (!used_.count(it.key())) fail(at(it.key()), "unknown field");
}

namespace {

template <class F>
auto guarded(const std::string& path, F&& f) {
	try {
		return f();
	} catch (const std::exception& e) {
		std::string msg = e.what();
		if (msg.starts_with("$")) throw;
		throw ConfigError(path + ": " + msg);
	}
}

std::size_t positive(const Fields& f, const std::string& key, std::int64_t dflt) {
	auto v = f.integer(key, dflt);
	if (v <= 0) fail(f.at(key), "must be positive");
	return static_cast<std::size_t>(v);
}

Point parse_point(const Fields& f, const std::string& key, int dim) {
	auto v = f.numbers(key);
	if (static_cast<int>(v.size()) != dim)
		fail(f.at(key), "expected " + std::to_string(dim) + " coordinates");
	return guarded(f.at(key), [&] { return geometry::make_point(v); });
}

geometry::Site parse_site(const std::vector<double>& v, int dim, const std::string& path) {
	if (static_cast<int>(v.size()) != dim) fail(path, "expected " + std::to_string(dim) + " coordinates");
	geometry::Site s;
	for (double x : v) {
		if (x != std::round(x)) fail(path, "site coordinates must be integers");
		s.push_back(static_cast<int>(x));
	}
	return s;
}

std::vector<geometry::Site> parse_sites(const Fields& f, const std::string& key, int dim) {
	auto rows = f.rows(key);
	std::vector<geometry::Site> out;
	for (std::size_t i = 0; i < rows.size(); ++i)
		out.push_back(parse_site(rows[i], dim, f.at(key) + "[" + std::to_string(i) + "]"));
	return out;
}

transport::EnergyFilter parse_filter(const Fields& f) {
	transport::EnergyFilter g;
	g.a = f.number("a");
	g.b = f.number("b");
	g.delta = f.number("delta");
	f.finish();
	guarded(f.path(), [&] {
		g.validate();
		return 0;
	});
	return g;
}

spectral::cplx parse_complex(const Fields& f, const std::string& key) {
	auto v = f.numbers(key);
	if (v.size() != 2) fail(f.at(key), "expected [re, im]");
	return {v[0], v[1]};
}

std::string fmt(double x) {
	char buf[64];
	std::snprintf(buf, sizeof buf, "%.17g", x);
	return buf;
}

json field_json(const model::DisorderField& f) {
	json sites = json::array();
	for (std::size_t i = 0; i < f.support.size(); ++i) sites.push_back(f.support.site_vec(i));
	return {{"seed", f.seed}, {"sites", sites}, {"values", f.values}};
}

std::string jsonl(const std::vector<json>& recs) {
	std::string out;
	for (const auto& r : recs) out += r.dump() + "\n";
	return out;
}

std::vector<json> records(const Experiment& e, const Context& ctx) {
	std::vector<json> out(ctx.trials);
	parallel_for(ctx.trials, ctx.workers, [&](std::size_t t) { out[t] = e.record(ctx, t); });
	return out;
}

} // namespace

json Experiment::record(const Context&, std::size_t) const { return nullptr; }

model::ModelSpec parse_model(const Fields& f) {
	model::ModelSpec s;
	s.lattice.n = static_cast<int>(f.integer("n", 1));
	s.lattice.d = static_cast<int>(f.integer("d", 1));
	s.coupling = f.number("coupling", 1.0);
	s.law.kind = guarded(f.at("density"), [&] { return model::parse_density(f.string("density", "uniform")); });
	s.law.m_plus = f.number("m_plus", 1.0);
	int r0 = 1;
	double u0 = 0;
	if (f.has("interaction")) {
		auto g = f.object("interaction");
		r0 = static_cast<int>(g.integer("r0", 1));
		u0 = g.number("u0", 0.0);
		g.finish();
	}
	f.finish();
	guarded(f.path(), [&] {
		s.lattice.validate();
		s.interaction = model::Interaction::step(s.lattice.d, r0, u0);
		s.validate();
		return 0;
	});
	return s;
}

Box parse_box(const Fields& f, const geometry::Lattice& lat) {
	Box b;
	b.lat = lat;
	b.metric = guarded(f.at("metric"), [&] { return geometry::parse_metric(f.string("metric", "inf")); });
	b.center = parse_point(f, "center", lat.dim());
	double side = f.number("side");
	if (!(side > 0)) fail(f.at("side"), "must be positive");
	b.side = guarded(f.at("side"), [&] { return geometry::to_ticks(side); });
	f.finish();
	return b;
}

Rect parse_rect(const Fields& f, const geometry::Lattice& lat) {
	Rect r;
	r.lat = lat;
	r.center = parse_point(f, "center", lat.dim());
	auto sides = f.numbers("sides");
	if (static_cast<int>(sides.size()) != lat.n) fail(f.at("sides"), "expected one side per particle");
	for (double s : sides) {
		if (!(s > 0)) fail(f.at("sides"), "sides must be positive");
		r.sides.push_back(guarded(f.at("sides"), [&] { return geometry::to_ticks(s); }));
	}
	r.symmetrized = f.boolean("symmetrized", true);
	f.finish();
	return r;
}

namespace {

// ---- experiment kinds ----

class GeometryAudit : public Experiment {
public:
	explicit GeometryAudit(const Fields& f) {
		p_.range = static_cast<int>(f.integer("range", 6));
		p_.max_n = static_cast<int>(f.integer("max_n", 3));
		p_.random_pairs = positive(f, "random_pairs", 10000);
		p_.boxes = positive(f, "boxes", 200);
		p_.covers = positive(f, "covers", 40);
		p_.separations = positive(f, "separations", 2000);
		p_.boundary_boxes = positive(f, "boundary_boxes", 50);
		if (p_.range < 1 || p_.range > 8) fail(f.at("range"), "must lie in [1, 8]");
		if (p_.max_n < 1 || p_.max_n > 3) fail(f.at("max_n"), "must lie in [1, 3]");
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto rep = audit::geometry_audit(p_, ctx.seed);
		out.files.push_back({"audit.csv", rep.csv()});
		out.summary = rep.to_json();
		for (const auto& r : rep.rows)
			if (r.mismatches) out.failures.push_back(r.check + ": " + std::to_string(r.mismatches) + " mismatches");
	}
	Region support(const Context&) const override { return {}; }

private:
	audit::AuditParams p_;
};

class Wegner : public Experiment {
public:
	Wegner(const Fields& f, const model::ModelSpec& spec) {
		box_ = parse_box(f.object("box"), spec.lattice);
		E_ = f.number("E");
		eps_ = f.numbers("eps_grid");
		if (eps_.empty()) fail(f.at("eps_grid"), "must not be empty");
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto r = estimates::wegner_single(box_, ctx.spec, E_, eps_, ctx.trials, ctx.seed, ctx.workers);
		std::ostringstream csv;
		csv << "eps,trials,hits,p_hat,ci_lo,ci_hi,bound,vacuous,pass\n";
		json reps = json::array();
		for (const auto& x : r.reports) {
			csv << fmt(x.eps) << "," << x.trials << "," << x.hits << "," << fmt(x.p_hat) << "," << fmt(x.ci.lo) << ","
			    << fmt(x.ci.hi) << "," << fmt(x.bound) << "," << x.vacuous << "," << x.pass << "\n";
			reps.push_back(estimates::to_json(x));
			if (!x.pass) out.failures.push_back("Wegner bound exceeded at eps=" + fmt(x.eps));
		}
		if (!r.monotone) out.failures.push_back("p_hat not monotone in eps");
		std::vector<json> recs;
		for (const auto& t : r.trials) recs.push_back({{"trial", t.trial}, {"seed", t.seed}, {"dist", t.statistic}});
		out.files.push_back({"wegner.csv", csv.str()});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"reports", reps}, {"monotone", r.monotone}};
	}
	Region support(const Context&) const override { return model::particle_support(geometry::enumerate(box_)); }
	json record(const Context& ctx, std::size_t t) const override {
		auto s = rng::trial_seed(ctx.seed, t);
		return {{"trial", t}, {"seed", s}, {"dist", estimates::wegner_statistic(box_, ctx.spec, E_, s)}};
	}

protected:
	Box box_;
	double E_ = 0;
	std::vector<double> eps_;
};

class WegnerPair : public Experiment {
public:
	WegnerPair(const Fields& f, const model::ModelSpec& spec) {
		a_ = parse_rect(f.object("a"), spec.lattice);
		b_ = parse_rect(f.object("b"), spec.lattice);
		eps_ = f.numbers("eps_grid");
		if (eps_.empty()) fail(f.at("eps_grid"), "must not be empty");
		if (f.has("independence")) {
			auto g = f.object("independence");
			indep_E_ = g.number("E");
			indep_eps_ = g.number("eps");
			g.finish();
			indep_ = true;
		}
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto r = estimates::wegner_pair(a_, b_, ctx.spec, eps_, ctx.trials, ctx.seed, ctx.workers);
		std::ostringstream csv;
		csv << "eps,trials,hits,p_hat,ci_lo,ci_hi,bound,vacuous,pass\n";
		json reps = json::array();
		for (const auto& x : r.reports) {
			csv << fmt(x.eps) << "," << x.trials << "," << x.hits << "," << fmt(x.p_hat) << "," << fmt(x.ci.lo) << ","
			    << fmt(x.ci.hi) << "," << fmt(x.bound) << "," << x.vacuous << "," << x.pass << "\n";
			reps.push_back(estimates::to_json(x));
			if (!x.pass) out.failures.push_back("pair Wegner bound exceeded at eps=" + fmt(x.eps));
		}
		std::vector<json> recs;
		for (const auto& t : r.trials) recs.push_back({{"trial", t.trial}, {"seed", t.seed}, {"gap", t.statistic}});
		out.files.push_back({"wegner_pair.csv", csv.str()});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"reports", reps}, {"monotone", r.monotone}};
		if (indep_) {
			auto ir = estimates::pair_independence(a_, b_, ctx.spec, indep_E_, indep_eps_, ctx.trials, ctx.seed,
			                                       ctx.workers);
			out.summary["independence"] = {{"p_a", ir.p_a},
			                               {"p_b", ir.p_b},
			                               {"p_joint", ir.p_joint},
			                               {"correlation", ir.correlation},
			                               {"p_coupled", ir.p_coupled},
			                               {"p_product", ir.p_product},
			                               {"z_score", ir.z_score},
			                               {"decorrelated", ir.decorrelated},
			                               {"matches_product", ir.matches_product}};
		}
	}
	Region support(const Context&) const override {
		return geometry::set_union(model::particle_support(geometry::enumerate(a_)),
		                           model::particle_support(geometry::enumerate(b_)));
	}
	json record(const Context& ctx, std::size_t t) const override {
		auto s = rng::trial_seed(ctx.seed, t);
		return {{"trial", t}, {"seed", s}, {"gap", estimates::wegner_pair_statistic(a_, b_, ctx.spec, s)}};
	}

private:
	Rect a_, b_;
	std::vector<double> eps_;
	bool indep_ = false;
	double indep_E_ = 0, indep_eps_ = 0;
};

class CombesThomas : public Experiment {
public:
	CombesThomas(const Fields& f, const model::ModelSpec& spec) {
		box_ = parse_box(f.object("box"), spec.lattice);
		z_ = parse_complex(f, "z");
		eps_ = f.numbers("eps_grid", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
		for (double e : eps_)
			if (!(e > 0 && e < 1)) fail(f.at("eps_grid"), "entries must lie in (0,1)");
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto recs = records(*this, ctx);
		std::ostringstream csv;
		csv << "trial,eta,max_ratio,worst_eps,pass\n";
		double worst = 0;
		std::size_t passed = 0;
		for (const auto& r : recs) {
			bool pass = r["verdict"] == "PASS";
			csv << r["trial"].get<std::size_t>() << "," << fmt(r["eta"]) << "," << fmt(r["max_ratio"]) << ","
			    << fmt(r["worst_eps"]) << "," << pass << "\n";
			worst = std::max(worst, r["max_ratio"].get<double>());
			passed += pass;
		}
		if (passed != recs.size())
			out.failures.push_back("Combes-Thomas bound failed on " + std::to_string(recs.size() - passed) + " trials");
		out.files.push_back({"ct.csv", csv.str()});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"trials", recs.size()}, {"passed", passed}, {"max_ratio", worst}};
	}
	Region support(const Context&) const override { return model::particle_support(geometry::enumerate(box_)); }
	json record(const Context& ctx, std::size_t t) const override {
		Region region = geometry::enumerate(box_);
		auto field = model::sample_disorder(ctx.spec, model::particle_support(region), rng::trial_seed(ctx.seed, t));
		auto j = estimates::to_json(estimates::combes_thomas_check(region, field, ctx.spec, z_, eps_));
		j["trial"] = t;
		return j;
	}

private:
	Box box_;
	spectral::cplx z_;
	std::vector<double> eps_;
};

class ProbLemma : public Experiment {
public:
	ProbLemma(const Fields& f, const model::ModelSpec& spec) {
		box_ = parse_box(f.object("box"), spec.lattice);
		p_.E = f.number("E");
		p_.eps = f.number("eps", p_.eps);
		p_.gamma = f.number("gamma", p_.gamma);
		p_.a_grid = f.numbers("a_grid", p_.a_grid);
		p_.enlarge = f.number("enlarge", p_.enlarge);
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto p = p_;
		p.trials = ctx.trials;
		p.seed = ctx.seed;
		Region region = geometry::enumerate(box_);
		auto rep = estimates::probability_lemma_check(box_, ctx.spec, geometry::inner_third_indices(box_, region),
		                                              geometry::inner_boundary_indices(region), p, ctx.workers);
		std::ostringstream csv;
		csv << "a,lhs_complex,ci_lo_complex,rhs_complex,lhs_real,ci_lo_real,rhs_real,pass\n";
		for (const auto& r : rep.rows)
			csv << fmt(r.a) << "," << fmt(r.lhs_complex) << "," << fmt(r.ci_complex.lo) << "," << fmt(r.rhs_complex)
			    << "," << fmt(r.lhs_real) << "," << fmt(r.ci_real.lo) << "," << fmt(r.rhs_real) << "," << r.pass
			    << "\n";
		if (!rep.pass) out.failures.push_back("probability lemma bound exceeded");
		out.files.push_back({"prob_lemma.csv", csv.str()});
		out.summary = estimates::to_json(rep);
	}
	Region support(const Context&) const override {
		Box big = box_;
		big.side = std::llround(static_cast<double>(box_.side) * p_.enlarge);
		return model::particle_support(geometry::enumerate(big));
	}

private:
	Box box_;
	estimates::ProbLemmaParams p_;
};

class Transport : public Experiment {
public:
	Transport(const Fields& f, const model::ModelSpec& spec) {
		setup_.box = parse_box(f.object("box"), spec.lattice);
		setup_.spec = spec;
		setup_.kind = guarded(f.at("kind"), [&] { return geometry::parse_metric(f.string("kind", "inf")); });
		setup_.p = f.number("p", 2);
		if (f.has("filter")) setup_.filter = parse_filter(f.object("filter"));
		auto trunc = f.string("truncation", "dirichlet");
		if (trunc == "periodic") setup_.trunc = model::Truncation::Periodic;
		else if (trunc != "dirichlet") fail(f.at("truncation"), "expected dirichlet or periodic");
		if (f.has("ys")) setup_.ys = parse_sites(f, "ys", spec.lattice.dim());
		else setup_.ys = transport::core_sites(setup_.box, setup_.kind, positive(f, "core", 5));
		if (setup_.ys.empty()) fail(f.path(), "no packet sites");
		grid_ = f.numbers("grid");
		auto mode = f.string("mode", "time_avg");
		if (mode != "time_avg" && mode != "random") fail(f.at("mode"), "expected time_avg or random");
		time_avg_ = mode == "time_avg";
		fit_ = f.boolean("fit", time_avg_);
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto s = transport::moment_series(setup_, grid_, time_avg_, ctx.trials, ctx.seed, ctx.workers);
		out.files.push_back({"series.csv", s.csv()});
		auto sup = s.sup_over_y();
		out.summary = {{"kind", s.kind}, {"p", s.p}, {"grid", grid_}, {"sup_over_y", sup}, {"trials", s.trials}};
		if (fit_) out.summary["fit"] = transport::to_json(transport::fit_transport_exponents(grid_, sup, setup_.p));
	}
	Region support(const Context&) const override {
		return model::particle_support(geometry::enumerate(setup_.box));
	}

private:
	transport::TransportSetup setup_;
	std::vector<double> grid_;
	bool time_avg_ = true, fit_ = true;
};

class IdentityCheck : public Experiment {
public:
	IdentityCheck(const Fields& f, const model::ModelSpec& spec) {
		box_ = parse_box(f.object("box"), spec.lattice);
		kind_ = guarded(f.at("kind"), [&] { return geometry::parse_metric(f.string("kind", "inf")); });
		p_ = f.number("p", 2);
		if (f.has("filter")) filter_ = parse_filter(f.object("filter"));
		if (f.has("y")) y_ = parse_site(f.numbers("y"), spec.lattice.dim(), f.at("y"));
		else y_ = transport::core_sites(box_, kind_, 1).at(0);
		Ts_ = f.numbers("T");
		for (double T : Ts_)
			if (!(T > 0)) fail(f.at("T"), "entries must be positive");
		quad_tol_ = f.number("quadrature_tol", 1e-3);
		f.finish();
		if (geometry::enumerate(box_).size() > 400) fail(f.at("box"), "identity checks are limited to 400 sites");
	}
	void run(const Context& ctx, Output& out) const override {
		auto recs = records(*this, ctx);
		std::ostringstream csv;
		csv << "trial,T,closed,residue,quadrature,residue_rel,quadrature_rel\n";
		double worst_res = 0, worst_quad = 0;
		for (const auto& r : recs)
			for (const auto& row : r["rows"]) {
				csv << r["trial"].get<std::size_t>() << "," << fmt(row["T"]) << "," << fmt(row["closed"]) << ","
				    << fmt(row["residue"]) << "," << fmt(row["quadrature"]) << "," << fmt(row["residue_rel"]) << ","
				    << fmt(row["quadrature_rel"]) << "\n";
				worst_res = std::max(worst_res, row["residue_rel"].get<double>());
				worst_quad = std::max(worst_quad, row["quadrature_rel"].get<double>());
			}
		if (worst_res > 1e-10) out.failures.push_back("residue form deviates by " + fmt(worst_res));
		if (worst_quad > quad_tol_) out.failures.push_back("quadrature deviates by " + fmt(worst_quad));
		out.files.push_back({"identity.csv", csv.str()});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"trials", recs.size()}, {"max_residue_rel", worst_res}, {"max_quadrature_rel", worst_quad}};
	}
	Region support(const Context&) const override { return model::particle_support(geometry::enumerate(box_)); }
	json record(const Context& ctx, std::size_t t) const override {
		Region region = geometry::enumerate(box_);
		auto field = model::sample_disorder(ctx.spec, model::particle_support(region), rng::trial_seed(ctx.seed, t));
		auto S = spectral::eig(model::assemble(region, field, ctx.spec));
		auto g = filter_ ? *filter_ : [&] {
			auto [lo, hi] = model::operator_norm_bounds(ctx.spec);
			return transport::EnergyFilter::plateau_on(lo, hi);
		}();
		auto yi = region.find(y_);
		if (!yi) throw PreconditionError("packet site outside the box");
		transport::MomentEngine eng(S, g, *yi, transport::moment_weights(region, y_, kind_, p_));
		json rows = json::array();
		for (double T : Ts_) {
			auto r = transport::moment_resolvent_identity_check(eng, T);
			rows.push_back({{"T", T},
			                {"closed", r.closed},
			                {"residue", r.residue},
			                {"quadrature", r.quadrature},
			                {"residue_rel", r.residue_rel},
			                {"quadrature_rel", r.quadrature_rel}});
		}
		return {{"trial", t}, {"rows", rows}};
	}

private:
	Box box_;
	Metric kind_ = Metric::Inf;
	double p_ = 2;
	std::optional<transport::EnergyFilter> filter_;
	geometry::Site y_;
	std::vector<double> Ts_;
	double quad_tol_ = 1e-3;
};

class Correlator : public Experiment {
public:
	Correlator(const Fields& f, const model::ModelSpec& spec) {
		setup_.box = parse_box(f.object("box"), spec.lattice);
		setup_.spec = spec;
		if (f.has("window")) {
			auto w = f.numbers("window");
			if (w.size() != 2 || !(w[0] <= w[1])) fail(f.at("window"), "expected [lo, hi] with lo <= hi");
			setup_.full_window = false;
			setup_.window = {w[0], w[1]};
		}
		setup_.zeta = f.number("zeta", 1.0);
		if (!(setup_.zeta > 0 && setup_.zeta <= 1)) fail(f.at("zeta"), "must lie in (0,1]");
		setup_.max_core = positive(f, "max_core", 40);
		setup_.zw_sites = positive(f, "zw_sites", 4);
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto r = localization::correlator_ensemble(setup_, ctx.trials, ctx.seed, ctx.workers);
		out.files.push_back({"correlator.csv", r.csv()});
		out.summary = r.summary();
		if (r.zw_violations) out.failures.push_back(std::to_string(r.zw_violations) + " Z/W records out of order");
	}
	Region support(const Context&) const override {
		return model::particle_support(geometry::enumerate(setup_.box));
	}

private:
	localization::CorrelatorSetup setup_;
};

msa::MSAThresholds parse_thresholds(const Fields& f) {
	msa::MSAThresholds t;
	t.theta = f.number("theta", t.theta);
	t.p = f.number("p", t.p);
	t.p0 = f.number("p0", t.p0);
	t.E1 = f.number("E1", t.E1);
	t.E2 = f.number("E2", t.E2);
	t.m_star = f.number("m_star", t.m_star);
	t.s = f.number("s", t.s);
	t.beta = f.number("beta", t.beta);
	t.kappa = f.number("kappa", t.kappa);
	f.finish();
	guarded(f.path(), [&] {
		t.validate();
		return 0;
	});
	return t;
}

class MsaStep : public Experiment {
public:
	MsaStep(const Fields& f, const model::ModelSpec& spec) {
		if (spec.lattice.n != 2) fail("$.model.n", "msa-step needs two particles");
		if (f.has("first")) {
			auto g = f.object("first");
			first_ = true;
			box_ = parse_box(g.object("box"), spec.lattice);
			if (box_.metric != Metric::Sym) fail(g.at("box") + ".metric", "expected sym");
			ell_ = g.number("ell");
			E_ = g.number("E");
			p_.theta = g.number("theta", 8);
			p_.s = g.number("s", 1);
			J_ = static_cast<int>(g.integer("J", 0));
			g.finish();
		}
		if (f.has("lift")) {
			auto g = f.object("lift");
			lift_ = true;
			lift_box_ = parse_box(g.object("box"), spec.lattice);
			lift_E_ = g.number("E");
			lift_E1_ = g.number("E1");
			lift_E2_ = g.number("E2");
			auto mode = g.string("mode", "regular");
			if (mode == "suitable") lift_mode_ = spectral::LiftMode::Suitable;
			else if (mode != "regular") fail(g.at("mode"), "expected regular or suitable");
			lift_param_ = g.number("param");
			g.finish();
		}
		if (f.has("prereg")) {
			auto g = f.object("prereg");
			prereg_ = true;
			pre_box_ = parse_box(g.object("box"), spec.lattice);
			pre_ell_ = g.number("ell");
			pre_E_ = g.numbers("E");
			th_ = g.has("thresholds") ? parse_thresholds(g.object("thresholds")) : msa::MSAThresholds{};
			g.finish();
		}
		if (!first_ && !lift_ && !prereg_) fail(f.path(), "needs at least one of first, lift, prereg");
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto recs = records(*this, ctx);
		std::ostringstream csv;
		csv << "trial,lemma,asserted,hypotheses,conclusion,violation\n";
		std::map<std::string, std::array<std::size_t, 3>> tally; // records, asserted, violations
		auto add = [&](std::size_t t, const std::string& lemma, bool asserted, bool hyp, bool concl, bool viol) {
			csv << t << "," << lemma << "," << asserted << "," << hyp << "," << concl << "," << viol << "\n";
			auto& x = tally[lemma];
			++x[0];
			x[1] += asserted;
			x[2] += viol;
		};
		for (const auto& r : recs) {
			auto t = r["trial"].get<std::size_t>();
			if (r.contains("first")) {
				const auto& s = r["first"];
				add(t, "first", s["asserted"], s["hypotheses"]["all"], s["conclusion"], s["violation"]);
			}
			if (r.contains("lift")) {
				const auto& s = r["lift"];
				add(t, "two_from_one", s["asserted"], s["hypotheses"], s["conclusion"], s["violation"]);
			}
			if (r.contains("prereg"))
				for (const auto& s : r["prereg"])
					add(t, "prereg", s["asserted"], s["HNR"].get<bool>() && s["preregular"].get<bool>(),
					    s["conclusion"], s["violation"]);
		}
		json sum = json::object();
		for (const auto& [lemma, x] : tally) {
			sum[lemma] = {{"records", x[0]}, {"asserted", x[1]}, {"violations", x[2]}};
			if (x[2]) out.failures.push_back(lemma + ": " + std::to_string(x[2]) + " violations");
		}
		out.files.push_back({"msa_step.csv", csv.str()});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"trials", recs.size()}, {"lemmas", sum}};
	}
	Region support(const Context&) const override {
		Region r;
		auto add = [&](const Box& b) {
			auto s = model::particle_support(geometry::enumerate(b));
			r = r.empty() ? s : geometry::set_union(r, s);
		};
		if (first_) add(msa::step_field_box(box_, ell_, J_));
		if (lift_) add(lift_box_);
		if (prereg_) add(pre_box_);
		return r;
	}
	json record(const Context& ctx, std::size_t t) const override {
		auto field = model::sample_disorder(ctx.spec, support(ctx), rng::trial_seed(ctx.seed, t));
		json j = {{"trial", t}};
		if (first_) j["first"] = msa::to_json(msa::deterministic_step_check(box_, ell_, field, ctx.spec, E_, p_, J_));
		if (lift_) {
			auto r = spectral::two_particle_from_one_check(lift_box_, field, ctx.spec, lift_E_, lift_E1_, lift_E2_,
			                                                lift_mode_, lift_param_);
			j["lift"] = {{"gate", r.gate},
			             {"hypotheses", r.hypotheses},
			             {"conclusion", r.conclusion},
			             {"asserted", r.asserted},
			             {"violation", r.violation},
			             {"lifted", r.lifted},
			             {"shifts", r.shifts},
			             {"verdict", spectral::to_json(r.two_particle)}};
		}
		if (prereg_) {
			json arr = json::array();
			for (double E : pre_E_) {
				auto r = msa::to_json(msa::preregularity_classify(pre_box_, pre_ell_, field, ctx.spec, E, th_));
				r["E"] = E;
				arr.push_back(r);
			}
			j["prereg"] = arr;
		}
		return j;
	}

private:
	bool first_ = false, lift_ = false, prereg_ = false;
	Box box_;
	double ell_ = 6, E_ = 0;
	spectral::ClassificationParams p_;
	int J_ = 0;
	Box lift_box_;
	double lift_E_ = 0, lift_E1_ = 0, lift_E2_ = 0, lift_param_ = 0;
	spectral::LiftMode lift_mode_ = spectral::LiftMode::Regular;
	Box pre_box_;
	double pre_ell_ = 3;
	std::vector<double> pre_E_;
	msa::MSAThresholds th_;
};

class MsaRecursion : public Experiment {
public:
	MsaRecursion(const Fields& f, const model::ModelSpec& spec) {
		if (f.has("schedule")) {
			auto g = f.object("schedule");
			sch_.L0 = g.number("L0", sch_.L0);
			sch_.Y = g.number("Y", sch_.Y);
			sch_.gamma = g.number("gamma", sch_.gamma);
			sch_.J = static_cast<int>(g.integer("J", sch_.J));
			auto mode = g.string("mode", "multiplicative");
			if (mode == "power") sch_.mode = msa::ScaleMode::Power;
			else if (mode != "multiplicative") fail(g.at("mode"), "expected multiplicative or power");
			sch_.zeta = g.number("zeta", sch_.zeta);
			sch_.tau = g.number("tau", sch_.tau);
			sch_.beta = g.number("beta", sch_.beta);
			sch_.zeta0 = g.number("zeta0", sch_.zeta0);
			sch_.zeta1 = g.number("zeta1", sch_.zeta1);
			sch_.zeta2 = g.number("zeta2", sch_.zeta2);
			sch_.kappa = g.number("kappa", sch_.kappa);
			g.finish();
			guarded(g.path(), [&] {
				sch_.validate();
				return 0;
			});
		}
		if (f.has("thresholds")) th_ = parse_thresholds(f.object("thresholds"));
		E_ = f.number("E");
		k_max_ = static_cast<int>(f.integer("k_max", 1));
		if (k_max_ < 0) fail(f.at("k_max"), "must be nonnegative");
		centers_ = f.has("centers") ? f.rows("centers")
		                            : std::vector<std::vector<double>>{std::vector<double>(spec.lattice.dim(), 0.0)};
		for (std::size_t i = 0; i < centers_.size(); ++i)
			if (static_cast<int>(centers_[i].size()) != spec.lattice.dim())
				fail(f.at("centers") + "[" + std::to_string(i) + "]", "expected n*d coordinates");
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto tr = msa::run_scale_recursion(sch_, th_, ctx.spec, E_, k_max_, centers_, ctx.trials, ctx.seed,
		                                   ctx.workers);
		out.files.push_back({"recursion.csv", tr.csv()});
		out.summary = tr.summary();
	}
	Region support(const Context&) const override { return {}; }

private:
	msa::ScaleSchedule sch_;
	msa::MSAThresholds th_;
	double E_ = 0;
	int k_max_ = 1;
	std::vector<std::vector<double>> centers_;
};

class EventR : public Experiment {
public:
	EventR(const Fields& f, const model::ModelSpec& spec) {
		if (spec.lattice.n != 2) fail("$.model.n", "event-R needs two particles");
		m_ = f.number("m");
		auto I = f.numbers("I");
		if (I.size() != 2 || !(I[0] <= I[1])) fail(f.at("I"), "expected [lo, hi] with lo <= hi");
		lo_ = I[0];
		hi_ = I[1];
		x_ = parse_point(f, "x", spec.lattice.dim());
		y_ = parse_point(f, "y", spec.lattice.dim());
		L_ = f.number("L");
		zeta2_ = f.number("zeta2", 0.6);
		f.finish();
	}
	void run(const Context& ctx, Output& out) const override {
		auto r = msa::estimate_event_R(ctx.spec, m_, lo_, hi_, x_, y_, L_, zeta2_, ctx.trials, ctx.seed, ctx.workers);
		std::vector<json> recs;
		for (std::size_t t = 0; t < r.occurred.size(); ++t) recs.push_back({{"trial", t}, {"occurred", r.occurred[t]}});
		out.files.push_back({"verdicts.jsonl", jsonl(recs)});
		out.summary = {{"report", estimates::to_json(r.report)}, {"overlay", r.overlay}, {"grid_points", r.energies}};
	}
	Region support(const Context& ctx) const override {
		Box bx{Metric::Sym, ctx.spec.lattice, x_, geometry::to_ticks(L_)};
		Box by{Metric::Sym, ctx.spec.lattice, y_, geometry::to_ticks(L_)};
		return model::particle_support(geometry::set_union(geometry::enumerate(bx), geometry::enumerate(by)));
	}
	json record(const Context& ctx, std::size_t t) const override {
		bool hit = msa::event_R_trial(ctx.spec, m_, lo_, hi_, x_, y_, L_, rng::trial_seed(ctx.seed, t));
		return {{"trial", t}, {"occurred", static_cast<int>(hit)}};
	}

private:
	double m_ = 1, lo_ = 0, hi_ = 0, L_ = 6, zeta2_ = 0.6;
	Point x_, y_;
};

std::unique_ptr<Experiment> make_experiment(const std::string& kind, const Fields& f, const model::ModelSpec& spec) {
	if (kind == "geometry-audit") return std::make_unique<GeometryAudit>(f);
	if (kind == "wegner") return std::make_unique<Wegner>(f, spec);
	if (kind == "wegner-pair") return std::make_unique<WegnerPair>(f, spec);
	if (kind == "ct") return std::make_unique<CombesThomas>(f, spec);
	if (kind == "prob-lemma") return std::make_unique<ProbLemma>(f, spec);
	if (kind == "transport") return std::make_unique<Transport>(f, spec);
	if (kind == "identity-check") return std::make_unique<IdentityCheck>(f, spec);
	if (kind == "correlator") return std::make_unique<Correlator>(f, spec);
	if (kind == "msa-step") return std::make_unique<MsaStep>(f, spec);
	if (kind == "msa-recursion") return std::make_unique<MsaRecursion>(f, spec);
	if (kind == "event-R") return std::make_unique<EventR>(f, spec);
	fail("$.kind", "unknown experiment kind '" + kind + "'");
}

std::string timestamp() {
	auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
	std::tm tm{};
	gmtime_r(&now, &tm);
	char buf[32];
	std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
	return buf;
}

std::string slurp(const std::filesystem::path& p) {
	std::ifstream in(p, std::ios::binary);
	if (!in) throw ConfigError(p.string() + ": cannot open");
	std::ostringstream os;
	os << in.rdbuf();
	return os.str();
}

} // namespace

json read_json(const std::filesystem::path& p) {
	auto text = slurp(p);
	try {
		return json::parse(text);
	} catch (const json::parse_error& e) {
		throw ConfigError("$: " + std::string(e.what()));
	}
}

ExperimentConfig parse_config(const json& j, const Overrides& o) {
	Fields top(j, "$");
	ExperimentConfig cfg;
	cfg.kind = top.string("kind");
	json eff = j;
	eff.erase("workers");
	auto seed = top.has("seed") ? top.integer("seed") : 1;
	if (seed < 0) fail("$.seed", "must be nonnegative");
	cfg.ctx.seed = o.seed ? *o.seed : static_cast<std::uint64_t>(seed);
	cfg.ctx.trials = o.trials ? *o.trials : positive(top, "trials", 100);
	if (top.has("trials")) (void)top.integer("trials");
	if (cfg.ctx.trials == 0) fail("$.trials", "must be positive");
	unsigned w = top.has("workers") ? static_cast<unsigned>(std::max<std::int64_t>(0, top.integer("workers"))) : 0;
	cfg.ctx.workers = resolve_workers(o.workers ? *o.workers : w);
	cfg.output = o.out ? *o.out : top.string("output", "out/" + cfg.kind);
	if (top.has("model")) cfg.ctx.spec = parse_model(top.object("model"));
	else cfg.ctx.spec = parse_model(Fields(json::object(), "$.model"));
	json params = top.has("params") ? j.at("params") : json::object();
	if (top.has("params")) (void)top.object("params");
	cfg.experiment = make_experiment(cfg.kind, Fields(params, "$.params"), cfg.ctx.spec);
	top.finish();
	eff["seed"] = cfg.ctx.seed;
	eff["trials"] = cfg.ctx.trials;
	eff["output"] = cfg.output;
	cfg.effective = eff;
	return cfg;
}

Output execute(const ExperimentConfig& cfg) {
	Output out;
	cfg.experiment->run(cfg.ctx, out);
	out.summary = {{"kind", cfg.kind}, {"result", out.summary}, {"failures", out.failures}};
	return out;
}

int run(const std::filesystem::path& config, const Overrides& o, std::ostream& log) {
	auto cfg = parse_config(read_json(config), o);
	std::string started = timestamp();
	auto out = execute(cfg);
	std::filesystem::path dir(cfg.output);
	std::filesystem::create_directories(dir);
	out.files.push_back({"summary.json", out.summary.dump(2) + "\n"});
	json outputs = json::object();
	for (const auto& [name, content] : out.files) {
		std::ofstream f(dir / name, std::ios::binary);
		f << content;
		outputs[name] = {{"sha256", sha256_hex(content)}, {"bytes", content.size()}};
	}
	json hashed = cfg.effective;
	hashed.erase("output");
	json manifest = {{"config", cfg.effective},
	                 {"config_hash", sha256_hex(hashed.dump())},
	                 {"code_version", code_version()},
	                 {"started", started},
	                 {"finished", timestamp()},
	                 {"workers", cfg.ctx.workers},
	                 {"outputs", outputs}};
	std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
	for (const auto& f : out.failures) log << "FAIL " << f << "\n";
	log << cfg.kind << ": " << (out.failures.empty() ? "ok" : "assertion failures") << ", artifacts in "
	    << dir.string() << "\n";
	return out.failures.empty() ? 0 : 1;
}

json replay(const std::filesystem::path& manifest_path, std::size_t trial) {
	json manifest = read_json(manifest_path);
	auto dir = manifest_path.parent_path();
	if (!manifest.contains("config") || !manifest.contains("outputs")) throw ConfigError("$: not a manifest");
	for (auto it = manifest["outputs"].begin(); it != manifest["outputs"].end(); ++it) {
		auto content = slurp(dir / it.key());
		if (sha256_hex(content) != it.value()["sha256"].get<std::string>())
			throw ConfigError("checksum mismatch for " + it.key());
	}
	auto cfg = parse_config(manifest["config"]);
	if (trial >= cfg.ctx.trials) throw PreconditionError("trial index beyond the recorded trial count");
	cfg.ctx.workers = 1;
	auto seed = rng::trial_seed(cfg.ctx.seed, trial);
	json out = {{"kind", cfg.kind}, {"trial", trial}, {"seed", seed}};
	auto rec = cfg.experiment->record(cfg.ctx, trial);
	if (rec.is_null()) throw PreconditionError(cfg.kind + " keeps no per-trial records");
	auto support = cfg.experiment->support(cfg.ctx);
	if (!support.empty()) out["field"] = field_json(model::sample_disorder(cfg.ctx.spec, support, seed));
	out["record"] = rec;
	if (manifest["outputs"].contains("verdicts.jsonl")) {
		std::istringstream in(slurp(dir / "verdicts.jsonl"));
		std::string line;
		for (std::size_t i = 0; std::getline(in, line); ++i)
			if (i == trial) out["archived_match"] = json::parse(line) == rec;
	}
	return out;
}

} // namespace lab::harness
