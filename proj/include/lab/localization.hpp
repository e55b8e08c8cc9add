#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lab/geometry.hpp"
#include "lab/model.hpp"
#include "lab/spectral.hpp"

namespace lab::localization {

struct EnergyWindow {
	double lo = 0, hi = 0; // closed

	bool contains(double E) const { return E >= lo && E <= hi; }
};

// Eigenvalue clusters inside the window; consecutive gaps <= 1e-8*scale are merged.
std::vector<std::pair<std::size_t, std::size_t>> clusters(const spectral::SpectralData& S, const EnergyWindow& I);

// Q_I(x,y) = sum over clusters of ||chi_x P|| ||P chi_y||
double correlator(const spectral::SpectralData& S, const EnergyWindow& I, std::size_t x, std::size_t y);

// |<x, f(H) chi_I(H) y>| for f given on the eigenvalues
double functional_entry(const spectral::SpectralData& S, const EnergyWindow& I, const std::vector<double>& f,
                        std::size_t x, std::size_t y);

struct ZWRecord {
	double lambda = 0;
	geometry::Site a;
	double Z = 0, W = 0;
	std::size_t multiplicity = 1;
};

// nu = (nd+1)/2 when nu <= 0
ZWRecord zw_weights(const spectral::SpectralData& S, const geometry::Region& region, std::size_t j, std::size_t a,
                    double nu = 0);

struct DistanceBin {
	double dist = 0;
	double mean = 0;
	std::size_t count = 0;
};

struct DecayFit {
	double slope = 0; // -inf when every off-diagonal bin vanishes
	double intercept = 0;
	double r2 = 0;
	std::size_t bins = 0;
	bool resolved = false; // slope < -0.05 and r2 >= 0.8
	std::string note;
};

DecayFit decay_fit(const std::vector<DistanceBin>& bins, double zeta);

struct CorrelatorSetup {
	geometry::Box box;
	model::ModelSpec spec;
	bool full_window = true; // I = operator norm window
	EnergyWindow window;
	double zeta = 1.0;
	std::size_t max_core = 40; // core sites used for pairs
	std::size_t zw_sites = 4;  // sites a per trial for Z/W records
};

struct PairRow {
	geometry::Site x, y;
	int dist = 0;
	double mean = 0, ci_lo = 0, ci_hi = 0;
};

struct CorrelatorResult {
	std::vector<PairRow> pairs;
	std::vector<DistanceBin> bins;
	DecayFit fit;
	std::size_t zw_records = 0;
	std::size_t zw_violations = 0; // records failing 0 <= Z <= W <= 1
	std::size_t trials = 0;

	std::string csv() const;
	nlohmann::json summary() const;
};

CorrelatorResult correlator_ensemble(const CorrelatorSetup& setup, std::size_t trials, std::uint64_t master,
                                     unsigned workers = 1);

} // namespace lab::localization
