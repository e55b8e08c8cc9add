#include "lab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lab/errors.hpp"
#include "lab/rng.hpp"

namespace lab::model {

using geometry::Region;

double DisorderLaw::rho_inf() const {
	switch (kind) {
	case Density::Uniform: return 1.0 / m_plus;
	case Density::Beta22: return 1.5 / m_plus;
	}
	return 0;
}

double DisorderLaw::mean() const { return 0.5 * m_plus; }

double DisorderLaw::sample(std::uint64_t key) const {
	switch (kind) {
	case Density::Uniform: return m_plus * rng::uniform(key);
	case Density::Beta22: {
		// median of three uniforms has density 6t(1-t)
		double a = rng::uniform(key, 0), b = rng::uniform(key, 1), c = rng::uniform(key, 2);
		return m_plus * std::max(std::min(a, b), std::min(std::max(a, b), c));
	}
	}
	return 0;
}

void DisorderLaw::validate() const {
	if (!(m_plus > 0) || !std::isfinite(m_plus)) throw ConfigError("disorder.m_plus must be positive");
}

Density parse_density(const std::string& s) {
	if (s == "uniform") return Density::Uniform;
	if (s == "beta22") return Density::Beta22;
	throw ConfigError("unsupported density kind '" + s + "'");
}

std::string to_string(Density d) { return d == Density::Uniform ? "uniform" : "beta22"; }

Interaction Interaction::step(int d, int r0, double u0) {
	Interaction I;
	I.d = d;
	I.r0 = r0;
	std::size_t count = 1;
	for (int k = 0; k < d; ++k) count *= 2 * r0 + 1;
	I.table.assign(count, u0);
	return I;
}

double Interaction::at(std::span<const int> y) const {
	std::size_t idx = 0;
	for (int k = 0; k < d; ++k) {
		if (std::abs(y[k]) > r0) return 0.0;
		idx = idx * (2 * r0 + 1) + (y[k] + r0);
	}
	return table[idx];
}

double Interaction::max() const { return table.empty() ? 0.0 : *std::max_element(table.begin(), table.end()); }

void Interaction::validate() const {
	if (r0 < 1) throw ConfigError("interaction.r0 must be >= 1");
	std::size_t count = 1;
	for (int k = 0; k < d; ++k) count *= 2 * r0 + 1;
	if (table.size() != count) throw ConfigError("interaction table has the wrong size");
	for (double v : table)
		if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("interaction must be finite and nonnegative");
	// U~(y) = U~(-y): the table is symmetric under index reversal
	for (std::size_t i = 0; i < count; ++i)
		if (table[i] != table[count - 1 - i]) throw ConfigError("interaction must satisfy U(y) = U(-y)");
}

void ModelSpec::validate() const {
	lattice.validate();
	law.validate();
	if (!(coupling >= 0) || !std::isfinite(coupling)) throw ConfigError("model.coupling must be >= 0");
	if (interaction.d != lattice.d) throw ConfigError("interaction dimension differs from lattice d");
	interaction.validate();
}

double ModelSpec::rho_inf() const {
	if (coupling == 0) return INFINITY;
	return law.rho_inf() / coupling;
}

ModelSpec ModelSpec::one_particle() const {
	ModelSpec s = *this;
	s.lattice.n = 1;
	return s;
}

double DisorderField::at(std::span<const int> x) const {
	auto i = support.find(x);
	if (!i) {
		std::string s;
		for (int c : x) s += (s.empty() ? "" : ",") + std::to_string(c);
		throw PreconditionError("missing disorder value at site (" + s + ")");
	}
	return values[*i];
}

std::string DisorderField::dump() const {
	std::ostringstream os;
	os << "# seed " << seed << " d " << support.lattice().d << " count " << support.size() << '\n';
	char buf[64];
	for (std::size_t i = 0; i < support.size(); ++i) {
		for (int c : support.site(i)) os << c << ' ';
		std::snprintf(buf, sizeof buf, "%.17g", values[i]);
		os << buf << '\n';
	}
	return os.str();
}

DisorderField DisorderField::parse(const std::string& text) {
	std::istringstream is(text);
	std::string hash, kseed, kd, kcount;
	DisorderField f;
	int d = 0;
	std::size_t count = 0;
	if (!(is >> hash >> kseed >> f.seed >> kd >> d >> kcount >> count) || hash != "#" || kseed != "seed")
		throw ConfigError("disorder dump: bad header");
	std::vector<int> flat(count * d);
	std::vector<std::pair<std::vector<int>, double>> rows(count);
	for (std::size_t i = 0; i < count; ++i) {
		rows[i].first.resize(d);
		for (int k = 0; k < d; ++k)
			if (!(is >> rows[i].first[k])) throw ConfigError("disorder dump: truncated");
		if (!(is >> rows[i].second)) throw ConfigError("disorder dump: truncated");
	}
	std::sort(rows.begin(), rows.end());
	for (std::size_t i = 0; i < count; ++i) std::copy(rows[i].first.begin(), rows[i].first.end(), flat.begin() + i * d);
	f.support = Region::from_flat({1, d}, std::move(flat));
	if (f.support.size() != count) throw ConfigError("disorder dump: duplicate sites");
	for (auto& r : rows) f.values.push_back(r.second);
	return f;
}

Region particle_support(const Region& region) {
	int n = region.lattice().n, d = region.lattice().d;
	std::vector<int> flat;
	flat.reserve(region.size() * n * d);
	for (std::size_t i = 0; i < region.size(); ++i) {
		auto s = region.site(i);
		flat.insert(flat.end(), s.begin(), s.end());
	}
	return Region::from_flat({1, d}, std::move(flat));
}

DisorderField sample_disorder(const ModelSpec& spec, const Region& support, std::uint64_t seed) {
	if (support.lattice().n != 1) throw PreconditionError("disorder support must be a set of one-particle sites");
	DisorderField f;
	f.seed = seed;
	f.support = support;
	f.values.resize(support.size());
	for (std::size_t i = 0; i < support.size(); ++i)
		f.values[i] = spec.coupling * spec.law.sample(rng::site_key(seed, support.site(i)));
	return f;
}

DisorderField sample_for(const ModelSpec& spec, const Region& region, std::uint64_t seed) {
	return sample_disorder(spec, particle_support(region), seed);
}

DisorderField zero_field(const Region& support) {
	DisorderField f;
	f.support = support;
	f.values.assign(support.size(), 0.0);
	return f;
}

std::pair<double, double> OperatorMatrix::enclosure() const {
	double lo = INFINITY, hi = -INFINITY;
	for (int k = 0; k < sparse.outerSize(); ++k) {
		double diag = 0, off = 0;
		for (Eigen::SparseMatrix<double>::InnerIterator it(sparse, k); it; ++it) {
			if (it.row() == k) diag += it.value();
			else off += std::abs(it.value());
		}
		lo = std::min(lo, diag - off);
		hi = std::max(hi, diag + off);
	}
	return {lo, hi};
}

OperatorMatrix assemble(const Region& region, const DisorderField& field, const ModelSpec& spec, Truncation trunc) {
	const auto& lat = region.lattice();
	if (!(lat == spec.lattice)) throw PreconditionError("region lattice differs from model lattice");
	int n = lat.n, d = lat.d, dim = lat.dim();
	std::size_t N = region.size();

	std::vector<std::pair<int, int>> ext(dim, {0, 0});
	if (trunc == Truncation::Periodic) {
		for (int k = 0; k < dim; ++k) ext[k] = {region.site(0)[k], region.site(0)[k]};
		for (std::size_t i = 0; i < N; ++i)
			for (int k = 0; k < dim; ++k) {
				ext[k].first = std::min(ext[k].first, region.site(i)[k]);
				ext[k].second = std::max(ext[k].second, region.site(i)[k]);
			}
		std::size_t vol = 1;
		for (auto [lo, hi] : ext) vol *= static_cast<std::size_t>(hi - lo + 1);
		if (vol != N) throw PreconditionError("periodic assembly needs a full rectangular region");
	}

	std::vector<Eigen::Triplet<double>> trip;
	trip.reserve(N * (2 * dim + 1));
	std::vector<int> y(dim), gap(d);
	for (std::size_t i = 0; i < N; ++i) {
		auto x = region.site(i);
		double v = 2.0 * dim;
		for (int p = 0; p < n; ++p) v += field.at(x.subspan(p * d, d));
		for (int p = 0; p < n; ++p)
			for (int q = p + 1; q < n; ++q) {
				for (int k = 0; k < d; ++k) gap[k] = x[p * d + k] - x[q * d + k];
				v += spec.interaction.at(gap);
			}
		trip.emplace_back(i, i, v);
		for (int k = 0; k < dim; ++k)
			for (int s : {-1, 1}) {
				std::copy(x.begin(), x.end(), y.begin());
				y[k] += s;
				if (trunc == Truncation::Periodic) {
					int w = ext[k].second - ext[k].first + 1;
					if (w == 1) continue;
					y[k] = ext[k].first + ((y[k] - ext[k].first) % w + w) % w;
				}
				if (auto j = region.find(y)) trip.emplace_back(i, *j, -1.0);
			}
	}
	OperatorMatrix H;
	H.region = region;
	H.sparse.resize(N, N);
	H.sparse.setFromTriplets(trip.begin(), trip.end());
	H.sparse.makeCompressed();
	return H;
}

std::pair<double, double> operator_norm_bounds(const ModelSpec& spec) {
	int n = spec.lattice.n, d = spec.lattice.d;
	double pairs = 0.5 * n * (n - 1);
	return {0.0, 4.0 * n * d + n * spec.coupling * spec.law.m_plus + pairs * spec.interaction.max()};
}

} // namespace lab::model
