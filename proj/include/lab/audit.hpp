#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace lab::audit {

struct AuditParams {
	int range = 6;              // exhaustive coordinates in [-range, range], d = 1
	int max_n = 3;
	std::size_t random_pairs = 10000;
	std::size_t boxes = 200;
	std::size_t covers = 40;
	std::size_t separations = 2000;
	std::size_t boundary_boxes = 50;
};

struct AuditRow {
	std::string check;
	std::size_t cases = 0;
	std::size_t mismatches = 0;
	std::string first; // description of the first mismatch
};

struct AuditReport {
	std::vector<AuditRow> rows;

	bool ok() const;
	const AuditRow* find(const std::string& check) const;
	std::string csv() const;
	nlohmann::json to_json() const;
};

// Geometry operations against brute-force references.
AuditReport geometry_audit(const AuditParams& p, std::uint64_t seed);
// Boundary lemma l/2-1 < dist_S(a,x) <= l/2 < dist_S(b,x) <= l/2+1 on symmetrized boxes.
AuditRow boundary_audit(std::size_t boxes, std::uint64_t seed);

} // namespace lab::audit
