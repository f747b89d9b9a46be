#pragma once

#include <sstream>
#include <string>

#include "cbm/trainer.hpp"

namespace cbm {

/// Offset-policy shorthand: one character per side (visible, hidden; DBMs
/// append one per extra layer), optional `_s` for the exponentially moving
/// average and `^b` / `^l` for reparameterization before or after the
/// gradient update.
///
///   0 zero   d data mean   m model mean   a average of both
///   h fixed 0.5            r uniform random per step
///
/// Examples: 00, d0, dd_s^l, aa^b, dm_s^b, mm_s^b.
inline const char* policy_grammar_help() {
  return "policy = [0dmahr]{2}('_s')?('^b'|'^l')?  e.g. 00, d0, dd_s^l, aa^b, dm_s^b";
}

inline OffsetSource parse_offset_source(char ch, const std::string& full) {
  switch (ch) {
    case '0': return OffsetSource::Zero;
    case 'd': return OffsetSource::DataMean;
    case 'm': return OffsetSource::ModelMean;
    case 'a': return OffsetSource::AverageDM;
    case 'h': return OffsetSource::FixedHalf;
    case 'r': return OffsetSource::RandomUniform;
    default:
      throw ParseError("unknown offset source '" + std::string(1, ch) + "' in policy \"" + full +
                       "\"; " + policy_grammar_help());
  }
}

inline char offset_source_char(OffsetSource s) {
  switch (s) {
    case OffsetSource::Zero: return '0';
    case OffsetSource::DataMean: return 'd';
    case OffsetSource::ModelMean: return 'm';
    case OffsetSource::AverageDM: return 'a';
    case OffsetSource::FixedHalf: return 'h';
    case OffsetSource::RandomUniform: return 'r';
  }
  return '?';
}

/// Parses the RBM policy shorthand. `nu_sliding` is the sliding factor used
/// when `_s` is present; without it the factors are 1 (no moving average).
inline OffsetPolicy parse_policy(const std::string& s, double nu_sliding = 0.01) {
  require(nu_sliding > 0.0 && nu_sliding <= 1.0, "parse_policy: bad sliding factor");
  if (s.size() < 2) throw ParseError("policy \"" + s + "\" too short; " + policy_grammar_help());
  OffsetPolicy p;
  p.visible_source = parse_offset_source(s[0], s);
  p.hidden_source = parse_offset_source(s[1], s);
  p.nu_mu = p.nu_lambda = 1.0;
  p.timing = ReparamTiming::BeforeGradient;
  std::size_t i = 2;
  bool seen_sliding = false, seen_timing = false;
  while (i < s.size()) {
    if (s.compare(i, 2, "_s") == 0 && !seen_sliding) {
      p.nu_mu = p.nu_lambda = nu_sliding;
      seen_sliding = true;
      i += 2;
    } else if (s.compare(i, 2, "^b") == 0 && !seen_timing) {
      p.timing = ReparamTiming::BeforeGradient;
      seen_timing = true;
      i += 2;
    } else if (s.compare(i, 2, "^l") == 0 && !seen_timing) {
      p.timing = ReparamTiming::AfterGradient;
      seen_timing = true;
      i += 2;
    } else {
      throw ParseError("cannot parse policy \"" + s + "\" at \"" + s.substr(i) + "\"; " +
                       policy_grammar_help());
    }
  }
  return p;
}

/// Canonical string for a policy; parse_policy(format_policy(p)) == p.
inline std::string format_policy(const OffsetPolicy& p) {
  std::string s;
  s += offset_source_char(p.visible_source);
  s += offset_source_char(p.hidden_source);
  if (p.nu_mu < 1.0 || p.nu_lambda < 1.0) s += "_s";
  s += p.timing == ReparamTiming::BeforeGradient ? "^b" : "^l";
  return s;
}

/// Sampler shorthand: cd-k, pcd-k, pt-c, or exact.
inline SamplerConfig parse_sampler(const std::string& s) {
  SamplerConfig cfg;
  auto parse_count = [&](std::size_t prefix_len) {
    const std::string tail = s.substr(prefix_len);
    try {
      std::size_t pos = 0;
      const int v = std::stoi(tail, &pos);
      if (pos != tail.size() || v < 1) throw std::invalid_argument("range");
      return v;
    } catch (const std::exception&) {
      throw ParseError("cannot parse sampler \"" + s + "\"; expected cd-k, pcd-k, pt-c, or exact");
    }
  };
  if (s == "exact") {
    cfg.kind = SamplerKind::Exact;
  } else if (s.rfind("pcd-", 0) == 0) {
    cfg.kind = SamplerKind::Pcd;
    cfg.k = parse_count(4);
  } else if (s.rfind("cd-", 0) == 0) {
    cfg.kind = SamplerKind::Cd;
    cfg.k = parse_count(3);
  } else if (s.rfind("pt-", 0) == 0) {
    cfg.kind = SamplerKind::Pt;
    cfg.chains = parse_count(3);
  } else {
    throw ParseError("unknown sampler \"" + s + "\"; expected cd-k, pcd-k, pt-c, or exact");
  }
  return cfg;
}

inline std::string format_sampler(const SamplerConfig& cfg) {
  std::ostringstream out;
  switch (cfg.kind) {
    case SamplerKind::Cd: out << "cd-" << cfg.k; break;
    case SamplerKind::Pcd: out << "pcd-" << cfg.k; break;
    case SamplerKind::Pt: out << "pt-" << cfg.chains; break;
    case SamplerKind::Exact: out << "exact"; break;
  }
  return out.str();
}

}  // namespace cbm
