#include "artic/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "artic/errors.hpp"

namespace artic {

namespace {

struct Acc {
  double sum = 0.0, max = 0.0;
  long n = 0;
  void add(double v) {
    sum += v;
    max = std::max(max, v);
    ++n;
  }
  ErrorStats errors() const { return {n > 0 ? sum / n : 0.0, max, n}; }
  TimingStats timing() const { return {n > 0 ? sum / n : 0.0, max}; }
};

std::string fmt(double v, const char* f = "%10.4f") {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

Metrics compute_metrics(const SimLog& log, double windup_s) {
  if (log.rows.empty()) {
    throw ContractViolation("compute_metrics: empty log");
  }
  Metrics m;
  m.framework = log.framework;
  m.windup_s = windup_s;
  m.duration_s = log.rows.back().t + log.dt;

  Acc ts, tc, is, ic;
  Acc ep, ef, cp, cf, cr;
  double kkt_e = 0.0, kkt_c = 0.0;
  long n = 0;
  for (const SimRow& r : log.rows) {
    if (r.t < windup_s) continue;
    const double et = std::hypot(r.truth.x_t - r.ref.x_t_r,
                                 r.truth.y_t - r.ref.y_t_r);
    const double ei = std::hypot(r.truth.x_i - r.ref.x_i_r,
                                 r.truth.y_i - r.ref.y_i_r);
    if (r.ref.segment == Segment::kStraight) {
      ts.add(et);
      is.add(ei);
    } else {
      tc.add(et);
      ic.add(ei);
    }
    ep.add(r.est_prep_ms);
    ef.add(r.est_fb_ms);
    cp.add(r.ctl_prep_ms);
    cf.add(r.ctl_fb_ms);
    cr.add(r.critical_ms);
    kkt_e += r.est_kkt;
    kkt_c += r.ctl_kkt;
    ++n;
  }
  if (n == 0) {
    throw ContractViolation("compute_metrics: no samples after windup");
  }
  m.samples = n;
  m.tractor_straight = ts.errors();
  m.tractor_curve = tc.errors();
  m.trailer_straight = is.errors();
  m.trailer_curve = ic.errors();
  m.est_prep = ep.timing();
  m.est_fb = ef.timing();
  m.ctl_prep = cp.timing();
  m.ctl_fb = cf.timing();
  m.critical = cr.timing();
  m.est_overall = {m.est_prep.mean + m.est_fb.mean,
                   m.est_prep.max + m.est_fb.max};
  m.ctl_overall = {m.ctl_prep.mean + m.ctl_fb.mean,
                   m.ctl_prep.max + m.ctl_fb.max};
  m.est_kkt_mean = kkt_e / n;
  m.ctl_kkt_mean = kkt_c / n;
  return m;
}

std::string Metrics::format_table() const {
  std::ostringstream os;
  os << "framework: " << framework << "   samples: " << samples
     << "   duration: " << fmt(duration_s, "%.1f") << " s (first "
     << fmt(windup_s, "%.1f") << " s excluded)\n\n";
  os << "Euclidean tracking error [m]          mean        max      samples\n";
  auto row = [&](const char* name, const ErrorStats& e) {
    os << fmt(0, "%.0s") << name << fmt(e.mean) << " " << fmt(e.max) << " "
       << fmt(static_cast<double>(e.count), "%10.0f") << "\n";
  };
  row("tractor straight  ", tractor_straight);
  row("tractor curve     ", tractor_curve);
  row("trailer straight  ", trailer_straight);
  row("trailer curve     ", trailer_curve);
  os << "\nExecution times [ms]                  mean        max\n";
  auto trow = [&](const char* name, const TimingStats& t) {
    os << name << fmt(t.mean) << " " << fmt(t.max) << "\n";
  };
  trow("estimator prep    ", est_prep);
  trow("estimator feedback", est_fb);
  trow("estimator overall ", est_overall);
  trow("controller prep   ", ctl_prep);
  trow("controller fb     ", ctl_fb);
  trow("controller overall", ctl_overall);
  trow("critical path     ", critical);
  os << "\nmean KKT residuals: estimator " << fmt(est_kkt_mean, "%.3e")
     << ", controller " << fmt(ctl_kkt_mean, "%.3e") << "\n";
  return os.str();
}

std::string format_comparison(const Metrics& a, const Metrics& b) {
  std::ostringstream os;
  os << "Execution times [ms, mean]\n";
  os << "                    " << fmt(0, "%.0s") << "A:" << a.framework
     << "  vs  B:" << b.framework << "\n";
  os << "                 A-est      A-ctl      B-est      B-ctl\n";
  auto trow = [&](const char* name, double ae, double ac, double be, double bc) {
    os << name << fmt(ae) << " " << fmt(ac) << " " << fmt(be) << " " << fmt(bc)
       << "\n";
  };
  trow("Preparation ", a.est_prep.mean, a.ctl_prep.mean, b.est_prep.mean,
       b.ctl_prep.mean);
  trow("Feedback    ", a.est_fb.mean, a.ctl_fb.mean, b.est_fb.mean,
       b.ctl_fb.mean);
  trow("Overall     ", a.est_overall.mean, a.ctl_overall.mean,
       b.est_overall.mean, b.ctl_overall.mean);
  os << "\nEuclidean tracking errors [m, mean]\n";
  os << "                     A          B\n";
  auto erow = [&](const char* name, const ErrorStats& ea, const ErrorStats& eb) {
    os << name << fmt(ea.mean) << " " << fmt(eb.mean) << "\n";
  };
  erow("tractor straight ", a.tractor_straight, b.tractor_straight);
  erow("tractor curve    ", a.tractor_curve, b.tractor_curve);
  erow("trailer straight ", a.trailer_straight, b.trailer_straight);
  erow("trailer curve    ", a.trailer_curve, b.trailer_curve);
  os << "\nmean KKT: A est " << fmt(a.est_kkt_mean, "%.3e") << " ctl "
     << fmt(a.ctl_kkt_mean, "%.3e") << " | B est "
     << fmt(b.est_kkt_mean, "%.3e") << " ctl " << fmt(b.ctl_kkt_mean, "%.3e")
     << "\n";
  return os.str();
}

}  // namespace artic
