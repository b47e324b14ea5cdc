#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "artic/model.hpp"

namespace artic {

enum class Segment { kStraight, kCurve };

const char* to_string(Segment s);

/// Geometry of the 8-shaped course: two full straights of straight_len
/// crossing at the course center plus one circular lobe per side.
struct EightTrajectoryConfig {
  double straight_len = 20.0;  ///< full length of each straight [m]
  double arc_radius = 10.0;    ///< lobe radius [m]
  double ref_speed = 1.0;      ///< tracked speed along the path [m/s]
  /// Pose of the first sample; when unset the course starts at the origin
  /// heading into the right lobe.
  std::optional<std::array<double, 3>> start_pose;

  void validate(const ModelConstants& c) const;
};

/// One node of the sampled reference.
struct ReferenceState {
  double x_t_r = 0.0;
  double y_t_r = 0.0;
  double psi_t_r = 0.0;
  double x_i_r = 0.0;
  double y_i_r = 0.0;
  double psi_i_r = 0.0;
  double v_r = 0.0;
  Segment segment = Segment::kStraight;

  Vec7 state_vec() const;
};

/// Closed time-based reference. The path is stored analytically (straight and
/// arc pieces), so sampling wraps exactly at the lap boundary.
class TimedReference {
 public:
  struct Piece {
    double s0;         // cumulative arc length at piece start
    double len;
    double x0, y0;     // pose at piece start
    double psi0;       // unwrapped heading at piece start
    double curvature;  // 0 for straights, +-1/R for arcs
    Segment label;
  };

  TimedReference(std::vector<Piece> pieces, double ref_speed, double dt,
                 double trailer_delay);

  double lap_length() const { return lap_length_; }
  double lap_time() const { return lap_length_ / ref_speed_; }
  double ref_speed() const { return ref_speed_; }
  double dt() const { return dt_; }

  /// Reference at time t >= 0; wraps around the closed course.
  ReferenceState sample(double t) const;

  /// Tractor pose at arc length s (any real value; wrapped).
  void pose_at(double s, double* x, double* y, double* psi) const;

  Segment segment_at(double s) const;

 private:
  std::vector<Piece> pieces_;
  double lap_length_;
  double ref_speed_;
  double dt_;
  double trailer_delay_;
};

/// Builds the 8-shaped course sampled at dt.
TimedReference build_eight(const EightTrajectoryConfig& cfg, double dt,
                           const ModelConstants& c = {});

/// N+1 reference nodes at t0, t0+dt, ..., t0+horizon. horizon must be an
/// integer multiple of dt; t0 < 0 is rejected.
std::vector<ReferenceState> sample_window(const TimedReference& traj, double t0,
                                          double horizon, double dt);

/// Writes t, tractor/trailer reference poses, speed, and segment label as CSV.
void export_csv(const TimedReference& traj, double dt, int laps,
                std::ostream& os);

}  // namespace artic
