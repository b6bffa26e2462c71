#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace islt {

using BigInt = boost::multiprecision::cpp_int;

// (a, b) with labels in 1..R.
using PairLabel = std::array<int, 2>;
// One pair per motion.
using JointLabel = std::vector<PairLabel>;

// Occupation numbers of joint pair labels over the slots S* = S*_≤ ∪ S*_>, with m1 slots
// in the first block and m3 in the second.
struct OccupancyMap {
  int k = 0;
  int p = 1;
  int R = 2;
  int m1 = 0;
  int m3 = 0;
  std::map<JointLabel, int> A;
  std::map<JointLabel, int> r;

  int slots() const { return m1 + m3; }
  void validate() const;
  std::map<PairLabel, int> marginal(int motion) const;
  std::string canonical() const;   // A only
  std::string hash() const;        // hex of the canonical form
};

// Per-motion label chains n_1..n_{K+1}; slot j pairs (n_j, n_{j+1}).
using LabelChains = std::vector<std::vector<int>>;

// Closed formula m1! m3! ∏ᵢ∏ Aᵢ! / ∏ A! · ∏ C(A, r), in exact integers.
BigInt psi_cardinality(const OccupancyMap& occ);

// Whether each chain's pair histogram equals the matching marginal of A.
bool in_phi(const OccupancyMap& occ, const LabelChains& N);

// Brute force over all p-tuples of slot permutations. Refuses above kPsiEnumerateCap tuples.
constexpr std::uint64_t kPsiEnumerateCap = 2'000'000'000ULL;
std::uint64_t psi_enumerate(const OccupancyMap& occ, const LabelChains& N);

// All chains of length K+1 over 1..R whose pair histogram equals hist.
std::vector<std::vector<int>> chains_with_histogram(int K, int R, const std::map<PairLabel, int>& hist);

struct PhiCount {
  std::uint64_t count = 0;   // #Φ(A) by enumeration
  BigInt bound;              // k^p ∏ᵢ ∏ Āᵢ! / ∏ Aᵢ!
};
PhiCount phi_count_bound(const OccupancyMap& occ);

struct AuditRow {
  int K = 0;                 // slots m1 + m3
  int p = 1;
  int R = 2;
  std::string a_hash;
  BigInt formula_total;      // Σ over r and N ∈ Φ(A) of the formula
  BigInt enumeration_total;  // same sum by enumeration
  bool equal = true;         // every single (A, r, N) agreed
  std::uint64_t n_checks = 0;
  std::uint64_t n_sequences = 0;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  bool all_equal = true;
  std::uint64_t total_checks = 0;
};

// Exhaustive check of the formula against enumeration for every valid (A, r, N) with
// 1 ≤ m1 + m3 ≤ k. Permutation counts are gathered per chain as word tables; chains
// with identical tables share one joint histogram.
AuditReport counting_audit(int k, int p, int R, int workers = 0);
void write_audit_csv(const std::string& path, const AuditReport& report);

}  // namespace islt
