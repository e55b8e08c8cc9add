#include "lab/localization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "lab/errors.hpp"
#include "lab/parallel.hpp"
#include "lab/rng.hpp"
#include "lab/transport.hpp"

namespace lab::localization {

using geometry::Metric;
using geometry::Region;

std::vector<std::pair<std::size_t, std::size_t>> clusters(const spectral::SpectralData& S, const EnergyWindow& I) {
	std::vector<std::pair<std::size_t, std::size_t>> out;
	double tol = 1e-8 * S.scale;
	for (std::size_t j = 0; j < S.size(); ++j) {
		if (!I.contains(S.values[j])) continue;
		if (!out.empty() && out.back().second == j && S.values[j] - S.values[j - 1] <= tol) out.back().second = j + 1;
		else out.emplace_back(j, j + 1);
	}
	return out;
}

double correlator(const spectral::SpectralData& S, const EnergyWindow& I, std::size_t x, std::size_t y) {
	double q = 0;
	for (auto [b, e] : clusters(S, I)) {
		auto n = static_cast<Eigen::Index>(e - b);
		auto bx = static_cast<Eigen::Index>(b);
		q += S.vectors.row(x).segment(bx, n).norm() * S.vectors.row(y).segment(bx, n).norm();
	}
	return q;
}

double functional_entry(const spectral::SpectralData& S, const EnergyWindow& I, const std::vector<double>& f,
                        std::size_t x, std::size_t y) {
	double s = 0;
	for (std::size_t j = 0; j < S.size(); ++j)
		if (I.contains(S.values[j])) s += f[j] * S.vectors(x, j) * S.vectors(y, j);
	return std::abs(s);
}

ZWRecord zw_weights(const spectral::SpectralData& S, const Region& region, std::size_t j, std::size_t a, double nu) {
	const auto& lat = region.lattice();
	if (nu <= 0) nu = (lat.dim() + 1) / 2.0;
	double tol = 1e-8 * S.scale;
	std::size_t b = j, e = j + 1;
	while (b > 0 && S.values[b] - S.values[b - 1] <= tol) --b;
	while (e < S.size() && S.values[e] - S.values[e - 1] <= tol) ++e;
	Eigen::MatrixXd B = S.vectors.middleCols(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
	Eigen::VectorXd tinv(region.size());
	for (std::size_t i = 0; i < region.size(); ++i) {
		double r = geometry::site_distance(Metric::Inf, lat, region.site(i), region.site(a));
		tinv[i] = std::pow(1 + r * r, -nu / 2);
	}
	Eigen::MatrixXd TB = tinv.asDiagonal() * B;
	Eigen::VectorXd ba = B.row(a).transpose();
	ZWRecord rec;
	rec.lambda = S.values[j];
	rec.a = region.site_vec(a);
	rec.multiplicity = e - b;
	rec.Z = ba.norm() / TB.norm();
	Eigen::MatrixXd M = TB.transpose() * TB;
	rec.W = std::sqrt(std::max(0.0, ba.dot(M.ldlt().solve(ba))));
	return rec;
}

DecayFit decay_fit(const std::vector<DistanceBin>& bins, double zeta) {
	if (bins.size() < 6) throw PreconditionError("insufficient bins: need at least 6 distance bins");
	if (!(zeta > 0 && zeta <= 1)) throw PreconditionError("zeta must lie in (0,1]");
	DecayFit f;
	std::vector<std::pair<double, double>> pts;
	bool any_offdiag = false;
	for (const auto& b : bins) {
		if (b.dist > 0 && b.mean > 0) any_offdiag = true;
		if (b.mean > 0) pts.emplace_back(std::pow(b.dist, zeta), std::log(b.mean));
	}
	f.bins = pts.size();
	if (!any_offdiag) {
		f.slope = -std::numeric_limits<double>::infinity();
		f.resolved = true;
		f.note = "off-diagonal correlator vanishes";
		return f;
	}
	if (pts.size() < 2) {
		f.note = "no decay resolved";
		return f;
	}
	double n = static_cast<double>(pts.size()), sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
	for (auto [x, y] : pts) {
		sx += x;
		sy += y;
		sxx += x * x;
		sxy += x * y;
		syy += y * y;
	}
	double vx = n * sxx - sx * sx, vy = n * syy - sy * sy, cxy = n * sxy - sx * sy;
	f.slope = cxy / vx;
	f.intercept = (sy - f.slope * sx) / n;
	f.r2 = vy > 0 ? cxy * cxy / (vx * vy) : 1.0;
	f.resolved = f.slope < -0.05 && f.r2 >= 0.8;
	f.note = f.resolved ? "decay resolved" : "no decay resolved";
	return f;
}

std::string CorrelatorResult::csv() const {
	std::ostringstream os;
	os << "x,y,dist_S,mean_Q,ci_lo,ci_hi\n";
	char buf[256];
	auto join = [](const geometry::Site& s) {
		std::string out;
		for (int c : s) out += (out.empty() ? "" : ";") + std::to_string(c);
		return out;
	};
	for (const auto& p : pairs) {
		std::snprintf(buf, sizeof buf, "%s,%s,%d,%.17g,%.17g,%.17g\n", join(p.x).c_str(), join(p.y).c_str(), p.dist,
		              p.mean, p.ci_lo, p.ci_hi);
		os << buf;
	}
	return os.str();
}

nlohmann::json CorrelatorResult::summary() const {
	nlohmann::json b = nlohmann::json::array();
	for (const auto& x : bins) b.push_back({{"dist", x.dist}, {"mean", x.mean}, {"count", x.count}});
	return {{"trials", trials},
	        {"bins", b},
	        {"fit", {{"slope", std::isfinite(fit.slope) ? nlohmann::json(fit.slope) : nlohmann::json("-inf")},
	                 {"intercept", fit.intercept},
	                 {"r2", fit.r2},
	                 {"bins", fit.bins},
	                 {"resolved", fit.resolved},
	                 {"note", fit.note}}},
	        {"zw_records", zw_records},
	        {"zw_violations", zw_violations}};
}

CorrelatorResult correlator_ensemble(const CorrelatorSetup& setup, std::size_t trials, std::uint64_t master,
                                     unsigned workers) {
	if (trials == 0) throw PreconditionError("need at least one trial");
	Region region = geometry::enumerate(setup.box);
	if (region.size() > spectral::kDenseCeiling) throw CeilingError("correlator region exceeds the dense ceiling");
	EnergyWindow I = setup.window;
	if (setup.full_window) {
		auto [lo, hi] = model::operator_norm_bounds(setup.spec);
		I = {lo, hi};
	}
	Metric kind = setup.box.lat.n == 1 ? Metric::Inf : Metric::Sym;
	auto core = transport::core_sites(setup.box, kind, setup.max_core);
	if (core.empty()) throw PreconditionError("box has no core sites");
	std::vector<std::size_t> idx;
	for (const auto& c : core) idx.push_back(*region.find(c));
	std::vector<std::pair<std::size_t, std::size_t>> pairs;
	for (std::size_t i = 0; i < idx.size(); ++i)
		for (std::size_t k = i; k < idx.size(); ++k) pairs.emplace_back(i, k);
	std::vector<std::size_t> zw_idx;
	for (std::size_t k = 0; k < std::min(setup.zw_sites, idx.size()); ++k)
		zw_idx.push_back(idx[k * idx.size() / std::max<std::size_t>(1, std::min(setup.zw_sites, idx.size()))]);

	struct TrialOut {
		std::vector<double> q;
		std::size_t records = 0, violations = 0;
	};
	std::vector<TrialOut> out(trials);
	auto support = model::particle_support(region);
	parallel_for(trials, workers, [&](std::size_t t) {
		auto field = model::sample_disorder(setup.spec, support, rng::trial_seed(master, t));
		auto S = spectral::eig(model::assemble(region, field, setup.spec));
		auto& o = out[t];
		o.q.reserve(pairs.size());
		for (auto [i, k] : pairs) o.q.push_back(correlator(S, I, idx[i], idx[k]));
		for (auto a : zw_idx)
			for (std::size_t j = 0; j < S.size(); ++j) {
				if (!I.contains(S.values[j])) continue;
				auto r = zw_weights(S, region, j, a);
				++o.records;
				if (!(r.Z >= 0 && r.Z <= r.W * (1 + 1e-10) && r.W <= 1 + 1e-10)) ++o.violations;
			}
	});

	CorrelatorResult res;
	res.trials = trials;
	double N = static_cast<double>(trials);
	std::map<int, std::pair<double, std::size_t>> bins;
	for (std::size_t p = 0; p < pairs.size(); ++p) {
		double s = 0, q = 0;
		for (const auto& o : out) s += o.q[p];
		double m = s / N;
		for (const auto& o : out) q += (o.q[p] - m) * (o.q[p] - m);
		double half = trials > 1 ? 2.5758293035489 * std::sqrt(q / (N - 1) / N) : 0.0;
		PairRow row;
		row.x = core[pairs[p].first];
		row.y = core[pairs[p].second];
		row.dist = geometry::site_distance(kind, region.lattice(), row.x, row.y);
		row.mean = m;
		row.ci_lo = m - half;
		row.ci_hi = m + half;
		res.pairs.push_back(row);
		auto& b = bins[row.dist];
		b.first += m;
		b.second += 1;
	}
	for (auto& [d, b] : bins) res.bins.push_back({static_cast<double>(d), b.first / b.second, b.second});
	for (const auto& o : out) {
		res.zw_records += o.records;
		res.zw_violations += o.violations;
	}
	if (res.bins.size() >= 6) res.fit = decay_fit(res.bins, setup.zeta);
	else res.fit.note = "insufficient bins";
	return res;
}

} // namespace lab::localization
