#include "islt/counting.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "islt/errors.hpp"
#include "islt/io.hpp"
#include "islt/simulate.hpp"

namespace islt {

namespace {

BigInt factorial(int n) {
  BigInt f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

BigInt binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  BigInt c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

int pair_code(const PairLabel& l, int R) { return (l[0] - 1) * R + (l[1] - 1); }

// Joint code: motion 0 is the most significant digit in base R².
int joint_code(const JointLabel& l, int R) {
  int c = 0;
  for (const auto& pl : l) c = c * R * R + pair_code(pl, R);
  return c;
}

// Formula from dense count arrays (joint codes, and per-motion pair codes for marginals).
BigInt formula_from_counts(int m1, int m3, const std::vector<int>& A, const std::vector<int>& r,
                           const std::vector<std::vector<int>>& marginals) {
  BigInt num = factorial(m1) * factorial(m3);
  for (const auto& mg : marginals)
    for (int v : mg) num *= factorial(v);
  BigInt den = 1;
  for (int v : A) den *= factorial(v);
  if (num % den != 0) throw NumericalError("psi_cardinality: factorial quotient is not an integer");
  BigInt out = num / den;
  for (std::size_t c = 0; c < A.size(); ++c) out *= binomial(A[c], r[c]);
  return out;
}

std::vector<int> joint_counts(const std::map<JointLabel, int>& m, int R, int p) {
  int size = 1;
  for (int i = 0; i < p; ++i) size *= R * R;
  std::vector<int> out(size, 0);
  for (const auto& [l, v] : m) out[joint_code(l, R)] += v;
  return out;
}

std::vector<std::vector<int>> marginal_counts(const OccupancyMap& occ) {
  std::vector<std::vector<int>> out(occ.p, std::vector<int>(occ.R * occ.R, 0));
  for (int i = 0; i < occ.p; ++i)
    for (const auto& [l, v] : occ.marginal(i)) out[i][pair_code(l, occ.R)] += v;
  return out;
}

std::vector<int> chain_pair_codes(const std::vector<int>& chain, int R) {
  std::vector<int> codes;
  for (std::size_t j = 0; j + 1 < chain.size(); ++j) codes.push_back((chain[j] - 1) * R + (chain[j + 1] - 1));
  return codes;
}

}  // namespace

void OccupancyMap::validate() const {
  require(k >= 0 && p >= 1 && R >= 1, "OccupancyMap: k >= 0, p >= 1, R >= 1 required");
  require(m1 >= 0 && m3 >= 0 && m1 + m3 <= k, "OccupancyMap: need 0 <= m1, m3 and m1 + m3 <= k");
  auto check_label = [&](const JointLabel& l) {
    require(static_cast<int>(l.size()) == p, "OccupancyMap: label has the wrong number of motions");
    for (const auto& pl : l)
      for (int v : pl) require(v >= 1 && v <= R, "OccupancyMap: label component outside 1..R");
  };
  int sa = 0, sr = 0;
  for (const auto& [l, v] : A) {
    check_label(l);
    require(v >= 0, "OccupancyMap: negative count in A");
    sa += v;
  }
  for (const auto& [l, v] : r) {
    check_label(l);
    require(v >= 0, "OccupancyMap: negative count in r");
    const auto it = A.find(l);
    const int a = it == A.end() ? 0 : it->second;
    if (v > a) throw ValidationError("OccupancyMap: r(l) exceeds A(l)");
    sr += v;
  }
  require(sa == m1 + m3, "OccupancyMap: total of A must equal m1 + m3");
  require(sr == m1, "OccupancyMap: total of r must equal m1");
}

std::map<PairLabel, int> OccupancyMap::marginal(int motion) const {
  std::map<PairLabel, int> out;
  for (const auto& [l, v] : A)
    if (v > 0) out[l.at(motion)] += v;
  return out;
}

std::string OccupancyMap::canonical() const {
  std::ostringstream os;
  os << "p=" << p << ";R=" << R << ";";
  for (const auto& [l, v] : A) {
    if (v == 0) continue;
    for (std::size_t i = 0; i < l.size(); ++i) os << (i ? "|" : "") << l[i][0] << "," << l[i][1];
    os << ":" << v << ";";
  }
  return os.str();
}

std::string OccupancyMap::hash() const { return hex64(fnv1a64(canonical())); }

BigInt psi_cardinality(const OccupancyMap& occ) {
  occ.validate();
  return formula_from_counts(occ.m1, occ.m3, joint_counts(occ.A, occ.R, occ.p), joint_counts(occ.r, occ.R, occ.p),
                             marginal_counts(occ));
}

bool in_phi(const OccupancyMap& occ, const LabelChains& N) {
  if (static_cast<int>(N.size()) != occ.p) return false;
  for (int i = 0; i < occ.p; ++i) {
    if (static_cast<int>(N[i].size()) != occ.slots() + 1) return false;
    std::map<PairLabel, int> hist;
    for (std::size_t j = 0; j + 1 < N[i].size(); ++j) {
      if (N[i][j] < 1 || N[i][j] > occ.R || N[i][j + 1] < 1 || N[i][j + 1] > occ.R) return false;
      ++hist[{N[i][j], N[i][j + 1]}];
    }
    if (hist != occ.marginal(i)) return false;
  }
  return true;
}

std::uint64_t psi_enumerate(const OccupancyMap& occ, const LabelChains& N) {
  occ.validate();
  const int K = occ.slots();
  require(static_cast<int>(N.size()) == occ.p, "psi_enumerate: one chain per motion");
  for (const auto& c : N) {
    require(static_cast<int>(c.size()) == K + 1, "psi_enumerate: chains must have m1 + m3 + 1 labels");
    for (int v : c) require(v >= 1 && v <= occ.R, "psi_enumerate: chain label outside 1..R");
  }
  long double cost = 1.0L;
  for (int i = 0; i < occ.p; ++i)
    for (int j = 2; j <= K; ++j) cost *= j;
  if (cost > static_cast<long double>(kPsiEnumerateCap))
    throw NumericalError("psi_enumerate: (K!)^p exceeds the enumeration cost cap");

  std::vector<std::vector<int>> P;
  for (const auto& c : N) P.push_back(chain_pair_codes(c, occ.R));
  const std::vector<int> A = joint_counts(occ.A, occ.R, occ.p);
  const std::vector<int> r = joint_counts(occ.r, occ.R, occ.p);
  std::vector<int> rest(A.size());
  for (std::size_t c = 0; c < A.size(); ++c) rest[c] = A[c] - r[c];

  std::vector<std::vector<int>> sigma(occ.p, std::vector<int>(K));
  for (auto& s : sigma) std::iota(s.begin(), s.end(), 0);
  std::uint64_t count = 0;
  std::vector<int> first(A.size()), second(A.size());
  const int base = occ.R * occ.R;
  auto check = [&]() {
    std::fill(first.begin(), first.end(), 0);
    std::fill(second.begin(), second.end(), 0);
    for (int j = 0; j < K; ++j) {
      int code = 0;
      for (int i = 0; i < occ.p; ++i) code = code * base + P[i][sigma[i][j]];
      ++(j < occ.m1 ? first : second)[code];
    }
    if (first == r && second == rest) ++count;
  };
  // Odometer over the p permutation factors.
  std::function<void(int)> rec = [&](int i) {
    if (i == occ.p) {
      check();
      return;
    }
    std::iota(sigma[i].begin(), sigma[i].end(), 0);
    do rec(i + 1);
    while (std::next_permutation(sigma[i].begin(), sigma[i].end()));
  };
  rec(0);
  return count;
}

std::vector<std::vector<int>> chains_with_histogram(int K, int R, const std::map<PairLabel, int>& hist) {
  require(K >= 0 && R >= 1, "chains_with_histogram: invalid K or R");
  std::map<PairLabel, int> target;
  for (const auto& [l, v] : hist)
    if (v > 0) target[l] = v;
  std::vector<std::vector<int>> out;
  std::vector<int> chain(K + 1, 1);
  while (true) {
    std::map<PairLabel, int> h;
    for (int j = 0; j < K; ++j) ++h[{chain[j], chain[j + 1]}];
    if (h == target) out.push_back(chain);
    int pos = K;
    while (pos >= 0 && chain[pos] == R) chain[pos--] = 1;
    if (pos < 0) break;
    ++chain[pos];
  }
  return out;
}

PhiCount phi_count_bound(const OccupancyMap& occ) {
  occ.validate();
  require(occ.slots() <= 12, "phi_count_bound: chain enumeration is capped at 12 slots");
  PhiCount out;
  out.count = 1;
  out.bound = 1;
  for (int i = 0; i < occ.p; ++i) out.bound *= occ.k;
  for (int i = 0; i < occ.p; ++i) {
    const auto mg = occ.marginal(i);
    out.count *= chains_with_histogram(occ.slots(), occ.R, mg).size();
    std::map<int, int> first;
    BigInt den = 1;
    for (const auto& [l, v] : mg) {
      first[l[0]] += v;
      den *= factorial(v);
    }
    BigInt num = 1;
    for (const auto& [a, v] : first) num *= factorial(v);
    if (num % den != 0) throw NumericalError("phi_count_bound: multinomial quotient is not an integer");
    out.bound *= num / den;
  }
  return out;
}

// ----- exhaustive audit ----------------------------------------------------------

namespace {

constexpr int kBits = 4;   // per-code count field in packed histograms

struct WordGroup {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> table;   // word -> multiplicity
  std::uint64_t chains = 0;
  std::vector<int> margin;                                      // pair-code histogram
};

std::uint64_t get_field(std::uint64_t key, int code) { return (key >> (kBits * code)) & 0xF; }

std::vector<WordGroup> build_groups(int K, int R) {
  const int base = R * R;
  std::map<std::vector<std::pair<std::uint64_t, std::uint64_t>>, std::size_t> index;
  std::vector<WordGroup> groups;
  std::vector<int> chain(K + 1, 1);
  std::vector<int> sigma(K);
  while (true) {
    const std::vector<int> P = chain_pair_codes(chain, R);
    std::unordered_map<std::uint64_t, std::uint64_t> words;
    std::iota(sigma.begin(), sigma.end(), 0);
    do {
      std::uint64_t w = 0;
      for (int j = 0; j < K; ++j) w |= static_cast<std::uint64_t>(P[sigma[j]]) << (kBits * j);
      ++words[w];
    } while (std::next_permutation(sigma.begin(), sigma.end()));
    std::vector<std::pair<std::uint64_t, std::uint64_t>> table(words.begin(), words.end());
    std::sort(table.begin(), table.end());
    auto [it, fresh] = index.emplace(table, groups.size());
    if (fresh) {
      WordGroup g;
      g.table = std::move(table);
      g.margin.assign(base, 0);
      for (int c : P) ++g.margin[c];
      groups.push_back(std::move(g));
    }
    ++groups[it->second].chains;
    int pos = K;
    while (pos >= 0 && chain[pos] == R) chain[pos--] = 1;
    if (pos < 0) break;
    ++chain[pos];
  }
  return groups;
}

// All joint tables with the given per-motion margins (p = 1: the margin itself).
void joint_tables(const std::vector<int>& m1, const std::vector<int>* m2, std::vector<std::vector<int>>& out) {
  const int b = static_cast<int>(m1.size());
  if (!m2) {
    out.push_back(m1);
    return;
  }
  std::vector<int> table(b * b, 0), col = *m2;
  std::function<void(int, int, int)> rec = [&](int row, int c, int left) {
    if (row == b) {
      for (int v : col)
        if (v != 0) return;
      out.push_back(table);
      return;
    }
    if (c == b - 1) {
      if (left > col[c]) return;
      table[row * b + c] = left;
      col[c] -= left;
      rec(row + 1, 0, row + 1 < b ? m1[row + 1] : 0);
      col[c] += left;
      table[row * b + c] = 0;
      return;
    }
    for (int v = 0; v <= std::min(left, col[c]); ++v) {
      table[row * b + c] = v;
      col[c] -= v;
      rec(row, c + 1, left - v);
      col[c] += v;
    }
    table[row * b + c] = 0;
  };
  rec(0, 0, m1[0]);
}

std::uint64_t pack(const std::vector<int>& counts) {
  std::uint64_t k = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) k |= static_cast<std::uint64_t>(counts[c]) << (kBits * c);
  return k;
}

struct PairKey {
  std::uint64_t a, r;
  bool operator==(const PairKey& o) const { return a == o.a && r == o.r; }
};
struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const { return std::hash<std::uint64_t>()(k.a * 0x9E3779B97F4A7C15ULL ^ k.r); }
};

struct Partial {
  std::uint64_t a_key = 0;
  BigInt formula_total, enumeration_total;
  bool equal = true;
  std::uint64_t checks = 0, sequences = 0;
};

std::string a_hash(std::uint64_t a_key, int p, int R, int codes) {
  std::ostringstream os;
  os << "p=" << p << ";R=" << R << ";";
  const int base = R * R;
  for (int c = 0; c < codes; ++c) {
    const auto v = get_field(a_key, c);
    if (v == 0) continue;
    std::vector<int> digits(p);
    int x = c;
    for (int i = p - 1; i >= 0; --i) {
      digits[i] = x % base;
      x /= base;
    }
    for (int i = 0; i < p; ++i) os << (i ? "|" : "") << digits[i] / R + 1 << "," << digits[i] % R + 1;
    os << ":" << v << ";";
  }
  return hex64(fnv1a64(os.str()));
}

std::vector<Partial> audit_group_pair(int K, int R, int p, const WordGroup& g1, const WordGroup* g2) {
  const int base = R * R;
  const int codes = p == 1 ? base : base * base;
  std::unordered_map<PairKey, std::uint64_t, PairKeyHash> hist;
  auto add_word = [&](std::uint64_t w1, std::uint64_t w2, std::uint64_t mult) {
    std::uint64_t a = 0;
    std::vector<int> jc(K);
    for (int j = 0; j < K; ++j) {
      const int c1 = static_cast<int>(get_field(w1, j));
      jc[j] = p == 1 ? c1 : c1 * base + static_cast<int>(get_field(w2, j));
      a += 1ULL << (kBits * jc[j]);
    }
    std::uint64_t r = 0;
    hist[{a, r}] += mult;
    for (int j = 0; j < K; ++j) {
      r += 1ULL << (kBits * jc[j]);
      hist[{a, r}] += mult;
    }
  };
  if (p == 1) {
    for (const auto& [w, m] : g1.table) add_word(w, 0, m);
  } else {
    for (const auto& [w1, m1] : g1.table)
      for (const auto& [w2, m2] : g2->table) add_word(w1, w2, m1 * m2);
  }

  std::vector<std::vector<int>> tables;
  joint_tables(g1.margin, p == 1 ? nullptr : &g2->margin, tables);
  std::vector<std::vector<int>> margins{g1.margin};
  if (p == 2) margins.push_back(g2->margin);
  const std::uint64_t weight = g1.chains * (p == 2 ? g2->chains : 1ULL);

  std::vector<Partial> out;
  std::size_t matched = 0;
  for (const auto& A : tables) {
    Partial part;
    part.a_key = pack(A);
    part.sequences = weight;
    std::vector<int> r(codes, 0);
    // Odometer over all r ≤ A.
    while (true) {
      const int m1 = std::accumulate(r.begin(), r.end(), 0);
      const BigInt f = formula_from_counts(m1, K - m1, A, r, margins);
      const auto it = hist.find({part.a_key, pack(r)});
      const std::uint64_t cnt = it == hist.end() ? 0 : it->second;
      if (it != hist.end()) ++matched;
      part.formula_total += f * weight;
      part.enumeration_total += BigInt(cnt) * weight;
      part.equal = part.equal && f == cnt;
      part.checks += weight;
      int c = 0;
      while (c < codes && r[c] == A[c]) r[c++] = 0;
      if (c == codes) break;
      ++r[c];
    }
    out.push_back(std::move(part));
  }
  // Any histogram key outside the valid (A, r) set is an unexplained count.
  if (matched != hist.size() && !out.empty()) out.front().equal = false;
  return out;
}

}  // namespace

AuditReport counting_audit(int k, int p, int R, int workers) {
  require(p == 1 || p == 2, "counting_audit: p must be 1 or 2");
  require(R >= 1 && R <= 2, "counting_audit: R must be 1 or 2");
  require(k >= 1 && k <= 8, "counting_audit: k must be in 1..8");
  AuditReport report;
  for (int K = 1; K <= k; ++K) {
    const std::vector<WordGroup> groups = build_groups(K, R);
    const std::size_t G = groups.size();
    const std::size_t jobs = p == 1 ? G : G * G;
    std::vector<std::vector<Partial>> results(jobs);
    const long long nj = static_cast<long long>(jobs);
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_workers(workers))
    for (long long q = 0; q < nj; ++q) {
      const std::size_t g1 = p == 1 ? q : q / G;
      const WordGroup* g2 = p == 1 ? nullptr : &groups[q % G];
      results[q] = audit_group_pair(K, R, p, groups[g1], g2);
    }
    std::map<std::uint64_t, Partial> merged;
    for (auto& res : results)
      for (auto& part : res) {
        auto [it, fresh] = merged.emplace(part.a_key, Partial{});
        Partial& m = it->second;
        m.a_key = part.a_key;
        m.formula_total += part.formula_total;
        m.enumeration_total += part.enumeration_total;
        m.equal = m.equal && part.equal;
        m.checks += part.checks;
        m.sequences += part.sequences;
      }
    const int codes = p == 1 ? R * R : R * R * R * R;
    for (const auto& [key, m] : merged) {
      AuditRow row;
      row.K = K;
      row.p = p;
      row.R = R;
      row.a_hash = a_hash(key, p, R, codes);
      row.formula_total = m.formula_total;
      row.enumeration_total = m.enumeration_total;
      row.equal = m.equal && m.formula_total == m.enumeration_total;
      row.n_checks = m.checks;
      row.n_sequences = m.sequences;
      report.all_equal = report.all_equal && row.equal;
      report.total_checks += row.n_checks;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_audit_csv(const std::string& path, const AuditReport& report) {
  CsvWriter csv(path);
  csv.header({"k", "p", "R", "a_hash", "formula_total", "enumeration_total", "equal", "n_checks", "n_sequences"});
  for (const auto& row : report.rows) {
    csv.begin_row();
    csv.field(row.K);
    csv.field(row.p);
    csv.field(row.R);
    csv.field(row.a_hash);
    csv.field(row.formula_total.str());
    csv.field(row.enumeration_total.str());
    csv.field(row.equal);
    csv.field(static_cast<unsigned long long>(row.n_checks));
    csv.field(static_cast<unsigned long long>(row.n_sequences));
    csv.end_row();
  }
}

}  // namespace islt
