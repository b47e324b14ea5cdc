#include "artic/trajectory.hpp"

#include <cmath>

#include "artic/errors.hpp"

namespace artic {

const char* to_string(Segment s) {
  return s == Segment::kStraight ? "straight" : "curve";
}

void EightTrajectoryConfig::validate(const ModelConstants& c) const {
  if (!(straight_len > 0.0)) {
    throw ConfigError("trajectory: straight_len must be > 0");
  }
  if (!(arc_radius > c.L_i)) {
    throw ConfigError("trajectory: arc_radius must exceed the trailer wheelbase");
  }
  if (!(ref_speed > 0.0 && ref_speed <= 2.0)) {
    throw ConfigError("trajectory: ref_speed must be in (0, 2] m/s");
  }
  // The reference must be drivable without saturating the tractor steering.
  const double max_curvature = std::tan(deg2rad(35.0)) / c.L_t;
  if (1.0 / arc_radius > max_curvature) {
    throw ConfigError("trajectory: arc_radius too tight for the steering bound");
  }
}

Vec7 ReferenceState::state_vec() const {
  Vec7 x;
  x << x_t_r, y_t_r, psi_t_r, x_i_r, y_i_r, psi_i_r, v_r;
  return x;
}

TimedReference::TimedReference(std::vector<Piece> pieces, double ref_speed,
                               double dt, double trailer_delay)
    : pieces_(std::move(pieces)),
      ref_speed_(ref_speed),
      dt_(dt),
      trailer_delay_(trailer_delay) {
  lap_length_ = pieces_.back().s0 + pieces_.back().len;
}

void TimedReference::pose_at(double s, double* x, double* y, double* psi) const {
  double sw = std::fmod(s, lap_length_);
  if (sw < 0.0) sw += lap_length_;
  const Piece* p = &pieces_.back();
  for (const Piece& cand : pieces_) {
    if (sw < cand.s0 + cand.len) {
      p = &cand;
      break;
    }
  }
  const double ds = sw - p->s0;
  if (p->curvature == 0.0) {
    *x = p->x0 + ds * std::cos(p->psi0);
    *y = p->y0 + ds * std::sin(p->psi0);
    *psi = p->psi0;
  } else {
    const double k = p->curvature;
    *psi = p->psi0 + k * ds;
    *x = p->x0 + (std::sin(*psi) - std::sin(p->psi0)) / k;
    *y = p->y0 - (std::cos(*psi) - std::cos(p->psi0)) / k;
  }
}

Segment TimedReference::segment_at(double s) const {
  double sw = std::fmod(s, lap_length_);
  if (sw < 0.0) sw += lap_length_;
  for (const Piece& cand : pieces_) {
    if (sw < cand.s0 + cand.len) return cand.label;
  }
  return pieces_.back().label;
}

ReferenceState TimedReference::sample(double t) const {
  const double s = ref_speed_ * t;
  ReferenceState r;
  pose_at(s, &r.x_t_r, &r.y_t_r, &r.psi_t_r);
  pose_at(s - trailer_delay_, &r.x_i_r, &r.y_i_r, &r.psi_i_r);
  r.v_r = ref_speed_;
  r.segment = segment_at(s);
  return r;
}

TimedReference build_eight(const EightTrajectoryConfig& cfg, double dt,
                           const ModelConstants& c) {
  if (!(dt > 0.0)) throw ConfigError("trajectory: dt must be > 0");
  cfg.validate(c);

  const double S = 0.5 * cfg.straight_len;  // center crossing to tangent point
  const double R = cfg.arc_radius;
  const double theta = std::atan2(R, S);     // heading of the first straight
  const double sweep = kPi + 2.0 * theta;    // turned angle per lobe
  const double arc_len = R * sweep;

  // Natural frame: start at the origin heading theta, right lobe first
  // (clockwise), then the full crossing straight, left lobe (counter-
  // clockwise), and the half straight back to the origin.
  std::vector<TimedReference::Piece> pieces;
  double s0 = 0.0, x = 0.0, y = 0.0, psi = theta;
  auto push = [&](double len, double curv, Segment label) {
    pieces.push_back({s0, len, x, y, psi, curv, label});
    if (curv == 0.0) {
      x += len * std::cos(psi);
      y += len * std::sin(psi);
    } else {
      const double psi1 = psi + curv * len;
      x += (std::sin(psi1) - std::sin(psi)) / curv;
      y -= (std::cos(psi1) - std::cos(psi)) / curv;
      psi = psi1;
    }
    s0 += len;
  };
  push(S, 0.0, Segment::kStraight);
  push(arc_len, -1.0 / R, Segment::kCurve);
  push(2.0 * S, 0.0, Segment::kStraight);
  push(arc_len, 1.0 / R, Segment::kCurve);
  push(S, 0.0, Segment::kStraight);

  // The construction must close the lap.
  if (std::abs(x) > 1e-9 || std::abs(y) > 1e-9 || std::abs(psi - theta) > 1e-12) {
    throw ConfigError("trajectory: 8-shape construction failed to close");
  }

  if (cfg.start_pose) {
    const auto& sp = *cfg.start_pose;
    const double alpha = sp[2] - theta;
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    for (auto& p : pieces) {
      const double px = p.x0, py = p.y0;
      p.x0 = sp[0] + ca * px - sa * py;
      p.y0 = sp[1] + sa * px + ca * py;
      p.psi0 += alpha;
    }
  }

  return TimedReference(std::move(pieces), cfg.ref_speed, dt, c.L_d + c.L_i);
}

std::vector<ReferenceState> sample_window(const TimedReference& traj, double t0,
                                          double horizon, double dt) {
  if (t0 < 0.0) throw ContractViolation("sample_window: t0 must be >= 0");
  if (!(dt > 0.0)) throw ContractViolation("sample_window: dt must be > 0");
  const int n = static_cast<int>(std::lround(horizon / dt));
  if (n < 0 || std::abs(horizon - n * dt) > 1e-9) {
    throw ContractViolation("sample_window: horizon must be N*dt");
  }
  std::vector<ReferenceState> out;
  out.reserve(n + 1);
  for (int j = 0; j <= n; ++j) {
    out.push_back(traj.sample(t0 + j * dt));
  }
  return out;
}

void export_csv(const TimedReference& traj, double dt, int laps,
                std::ostream& os) {
  os << "t,x_t_r,y_t_r,psi_t_r,x_i_r,y_i_r,psi_i_r,v_r,segment\n";
  const int n = static_cast<int>(std::ceil(laps * traj.lap_time() / dt));
  char buf[64];
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const ReferenceState r = traj.sample(t);
    const double vals[] = {t,       r.x_t_r, r.y_t_r, r.psi_t_r,
                           r.x_i_r, r.y_i_r, r.psi_i_r, r.v_r};
    for (double v : vals) {
      std::snprintf(buf, sizeof(buf), "%.17g,", v);
      os << buf;
    }
    os << to_string(r.segment) << "\n";
  }
}

}  // namespace artic
