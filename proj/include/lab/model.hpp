#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "lab/geometry.hpp"

namespace lab::model {

enum class Density { Uniform, Beta22 };

// Bounded density on [0, M+].
struct DisorderLaw {
	Density kind = Density::Uniform;
	double m_plus = 1.0;

	double rho_inf() const;
	double mean() const;
	double sample(std::uint64_t key) const;
	void validate() const;
};

Density parse_density(const std::string& s);
std::string to_string(Density d);

// U~(y) >= 0 on ||y|| <= r0, symmetric, zero beyond r0.
struct Interaction {
	int d = 1;
	int r0 = 1;
	std::vector<double> table; // over [-r0, r0]^d, last coordinate fastest

	static Interaction step(int d, int r0, double u0);
	double at(std::span<const int> y) const;
	double max() const;
	void validate() const;
};

struct ModelSpec {
	geometry::Lattice lattice{};
	DisorderLaw law{};
	double coupling = 1.0;
	Interaction interaction = Interaction::step(1, 1, 0.0);

	void validate() const;
	// sup norm of the density of coupling * omega
	double rho_inf() const;
	// Same disorder and interaction, n = 1.
	ModelSpec one_particle() const;
};

// Potential values lambda * omega_x on a finite set of Z^d.
struct DisorderField {
	std::uint64_t seed = 0;
	geometry::Region support;
	std::vector<double> values;

	double at(std::span<const int> x) const;
	std::string dump() const;
	static DisorderField parse(const std::string& text);
};

// Every particle position of every site.
geometry::Region particle_support(const geometry::Region& region);

DisorderField sample_disorder(const ModelSpec& spec, const geometry::Region& support, std::uint64_t seed);
DisorderField sample_for(const ModelSpec& spec, const geometry::Region& region, std::uint64_t seed);
DisorderField zero_field(const geometry::Region& support);

enum class Truncation { Dirichlet, Periodic };

struct OperatorMatrix {
	geometry::Region region;
	Eigen::SparseMatrix<double> sparse;

	std::size_t size() const { return region.size(); }
	Eigen::MatrixXd dense() const { return Eigen::MatrixXd(sparse); }
	// Gershgorin enclosure of the spectrum.
	std::pair<double, double> enclosure() const;
};

OperatorMatrix assemble(const geometry::Region& region, const DisorderField& field, const ModelSpec& spec,
                        Truncation trunc = Truncation::Dirichlet);

// [0, 4nd + n*lambda*M+ + max U]
std::pair<double, double> operator_norm_bounds(const ModelSpec& spec);

} // namespace lab::model
