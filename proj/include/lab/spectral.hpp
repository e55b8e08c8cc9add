#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lab/geometry.hpp"
#include "lab/model.hpp"

namespace lab::spectral {

using cplx = std::complex<double>;

inline constexpr std::size_t kDenseCeiling = 4000;
// Regions up to this size use dense LU for Green columns.
inline constexpr std::size_t kDenseSolve = 400;

double resonance_tolerance(double scale);

struct SpectralData {
	Eigen::VectorXd values;  // ascending
	Eigen::MatrixXd vectors; // orthonormal columns
	double scale = 1.0;      // max |eigenvalue|, at least 1

	std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

SpectralData eig(const model::OperatorMatrix& H, std::size_t ceiling = kDenseCeiling);
Eigen::VectorXd eigenvalues(const model::OperatorMatrix& H, std::size_t ceiling = kDenseCeiling);

double dist_to_spectrum(const Eigen::VectorXd& sorted, double E);
// min |a_i - b_j| for sorted inputs
double min_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

cplx green_entry(const model::OperatorMatrix& H, cplx z, std::size_t u, std::size_t v);
cplx green_entry(const SpectralData& S, cplx z, std::size_t u, std::size_t v);
Eigen::MatrixXcd green_matrix(const SpectralData& S, cplx z);
// (H - z)^{-1} by LU
Eigen::MatrixXcd resolvent(const model::OperatorMatrix& H, cplx z);
// G(rows, cols) at real E by LU (dense or sparse).
Eigen::MatrixXd green_block(const model::OperatorMatrix& H, double E, const std::vector<std::size_t>& rows,
                            const std::vector<std::size_t>& cols);

struct ClassificationParams {
	double theta = 2.0;
	double m = 1.0;
	double zeta = 0.5;
	double s = 1.0;
	double beta = 0.5;

	void validate() const;
};

struct ResonanceMargins {
	double ell = 0;
	double dist = 0;           // exact, or a certified lower bound
	bool dist_exact = true;
	double suit_threshold = 0; // ell^{-s}
	double res_threshold = 0;  // exp(-ell^beta)/2
	bool suitably_resonant = false;
	bool resonant = false;
	bool determined = true;
};

ResonanceMargins make_margins(double dist, bool exact, double ell, const ClassificationParams& p);

struct BoxVerdict {
	double L = 0;
	double E = 0;
	bool on_spectrum = false;
	bool determined = true;
	bool suitable = false;
	bool regular = false;
	bool ses = false;
	double max_green = 0;
	geometry::Site u, v;
	double suit_threshold = 0, reg_threshold = 0, ses_threshold = 0;
	ResonanceMargins margins;
	std::string cause;

	bool suitable_at(double theta) const;
	bool regular_at(double m) const;
};

nlohmann::json to_json(const ResonanceMargins& m);
nlohmann::json to_json(const BoxVerdict& v);
nlohmann::json to_json(const ClassificationParams& p);

struct DistanceBound {
	double value = 0;
	bool exact = true;
};

// Matrix, inner third and inner boundary of a box, with lazily computed spectrum.
class BoxAnalysis {
public:
	BoxAnalysis(const geometry::Box& box, const model::DisorderField& field, const model::ModelSpec& spec,
	            std::size_t dense_ceiling = kDenseCeiling);

	const geometry::Box& box() const { return box_; }
	const geometry::Region& region() const { return H_.region; }
	const model::OperatorMatrix& matrix() const { return H_; }
	const std::vector<std::size_t>& inner() const { return inner_; }
	const std::vector<std::size_t>& minus() const { return minus_; }

	bool spectrum_available() const;
	const Eigen::VectorXd& spectrum() const;
	// Sorted spectrum known by other means (e.g. a sum-set); replaces diagonalization.
	void assume_spectrum(Eigen::VectorXd sorted) { spectrum_ = std::move(sorted); }
	DistanceBound spectrum_distance(double E) const;

	struct Peak {
		double value = 0;
		std::size_t u = 0, v = 0;
	};
	Peak max_green(double E) const;
	BoxVerdict verdict(double E, const ClassificationParams& p) const;

private:
	geometry::Box box_;
	model::OperatorMatrix H_;
	std::vector<std::size_t> inner_, minus_;
	std::size_t ceiling_;
	std::pair<double, double> enclosure_;
	mutable std::optional<Eigen::VectorXd> spectrum_;
};

BoxVerdict classify_box(const geometry::Box& box, const model::DisorderField& field, const model::ModelSpec& spec,
                        double E, const ClassificationParams& p);

ResonanceMargins resonance_status(const geometry::Rect& rect, const model::DisorderField& field,
                                  const model::ModelSpec& spec, double E, const ClassificationParams& p);
ResonanceMargins resonance_status(const geometry::Box& box, const model::DisorderField& field,
                                  const model::ModelSpec& spec, double E, const ClassificationParams& p);

struct DecompositionReport {
	std::size_t values = 0;
	double multiset_error = 0; // max |sorted spectrum - sorted sum-set|
	double cross_max = 0;      // max |G| across the two permutation components
	double tensor_error = 0;   // max |G - tensor resolvent| within a component
};

DecompositionReport ni_decompose_check(const geometry::Rect& rect, const model::DisorderField& field,
                                       const model::ModelSpec& spec, double E);

struct IdentityReport {
	cplx lhs, rhs;
	double residual = 0;
	double relative = 0;
	std::size_t boundary_edges = 0;
	double bound = 0; // |boundary| * max |G1(u,a) G2(b,v)|
};

IdentityReport geometric_resolvent_check(const geometry::Region& inner, const geometry::Region& outer,
                                         const model::DisorderField& field, const model::ModelSpec& spec, cplx z,
                                         std::span<const int> u, std::span<const int> v);

enum class LiftMode { Regular, Suitable };

struct LiftReport {
	bool gate = false;        // parameter conditions of the lemma
	bool hypotheses = false;  // one-particle verdicts at all shifted energies
	bool conclusion = false;  // two-particle verdict
	bool asserted = false;
	bool violation = false;
	double param = 0;         // m or theta used for one-particle boxes
	double lifted = 0;        // m - 6(d+1)log(2L)/L or theta/2
	std::size_t shifts = 0;
	BoxVerdict two_particle;
};

LiftReport two_particle_from_one_check(const geometry::Box& box, const model::DisorderField& field,
                                       const model::ModelSpec& spec, double E, double E1, double E2,
                                       LiftMode mode, double param);

} // namespace lab::spectral
