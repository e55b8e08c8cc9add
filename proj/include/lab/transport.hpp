#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lab/geometry.hpp"
#include "lab/model.hpp"
#include "lab/spectral.hpp"

namespace lab::transport {

// h(s) = phi(s) / (phi(s) + phi(1-s)), phi(s) = exp(-1/s) for s > 0
double smooth_step(double s);

struct EnergyFilter {
	double a = 0, b = 1;
	double delta = 0.1;

	// plateau [lo, hi], transition width (hi - lo)/10 on each side
	static EnergyFilter plateau_on(double lo, double hi);
	void validate() const;
	double operator()(double E) const;
};

// Weights <dist(y,u)>^p over the region.
Eigen::VectorXd moment_weights(const geometry::Region& region, std::span<const int> y, geometry::Metric kind, double p);
// Same with distances on the torus of a full rectangular region.
Eigen::VectorXd torus_weights(const geometry::Region& region, std::span<const int> y, geometry::Metric kind, double p);

// e^{-itH} g(H) delta_y over the region
Eigen::VectorXcd amplitude(const spectral::SpectralData& S, const EnergyFilter& g, std::size_t y, double t);

// One packet: eigenbasis, filter coefficients c_j = g(l_j) psi_j(y), and weights.
class MomentEngine {
public:
	MomentEngine(const spectral::SpectralData& S, const EnergyFilter& g, std::size_t y, Eigen::VectorXd weights);

	double norm2() const; // ||g(H) delta_y||^2
	double random(double t) const;
	// closed form with kernel 4/(4+T^2 D^2)
	double time_avg(double T) const;
	// residue form with kernel 2/(2+iTD); returns the complex sum
	spectral::cplx residue(double T) const;
	// (1/(pi T)) int_R sum_v w_v |<v, G(E+i/T) g(H) y>|^2 dE by adaptive quadrature
	double energy_quadrature(double T, double tol = 1e-10) const;
	// int_0^{40T} (2/T) e^{-2t/T} M(t) dt by adaptive quadrature
	double time_quadrature(double T, double tol = 1e-10) const;

private:
	const spectral::SpectralData& S_;
	Eigen::VectorXd c_, w_;
	std::vector<Eigen::Index> active_; // indices with c_j != 0
	mutable std::optional<Eigen::MatrixXd> A_; // c_j c_k W_jk on active indices
	const Eigen::MatrixXd& pair_matrix() const;
};

struct IdentityResiduals {
	double closed = 0, residue = 0, quadrature = 0;
	double residue_imag = 0;
	double residue_rel = 0, quadrature_rel = 0;
};

IdentityResiduals moment_resolvent_identity_check(const MomentEngine& engine, double T);

struct FitResult {
	double beta = 0;              // trailing-window slope of log M vs p log T
	double local_min = 0, local_max = 0;
	std::size_t window = 0;
	bool in_range = true;         // beta in [-0.05, 1.05]
};

FitResult fit_transport_exponents(const std::vector<double>& T, const std::vector<double>& M, double p);

struct MomentSeries {
	std::string kind = "time_avg"; // or "random"
	double p = 2;
	std::vector<double> grid;
	std::vector<geometry::Site> ys;
	std::vector<std::vector<double>> mean, ci_lo, ci_hi; // [y][grid]
	std::size_t trials = 0;

	std::vector<double> sup_over_y() const;
	std::string csv() const;
};

struct TransportSetup {
	geometry::Box box;
	model::ModelSpec spec;
	std::optional<EnergyFilter> filter; // default: plateau on the Gershgorin enclosure
	geometry::Metric kind = geometry::Metric::Inf;
	double p = 2;
	std::vector<geometry::Site> ys;
	model::Truncation trunc = model::Truncation::Dirichlet;
};

// Ensemble of moments on a grid of T (time_avg) or t (random).
MomentSeries moment_series(const TransportSetup& setup, const std::vector<double>& grid, bool time_avg,
                           std::size_t trials, std::uint64_t master, unsigned workers = 1);

// Sites of the box at dist_kind >= L/4 from the inner boundary, thinned to at most max_count.
std::vector<geometry::Site> core_sites(const geometry::Box& box, geometry::Metric kind, std::size_t max_count);

nlohmann::json to_json(const FitResult& f);

} // namespace lab::transport
