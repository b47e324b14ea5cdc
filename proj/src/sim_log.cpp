#include "artic/sim_log.hpp"

#include <cstdio>
#include <cstring>
#include <sstream>

#include "artic/errors.hpp"

namespace artic {

namespace {

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
  out += ',';
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

const char* SimLog::header() {
  return "k,t,"
         "x_t,y_t,psi_t,x_i,y_i,psi_i,v,"
         "mu_true,kappa_true,eta_true,beta_true,"
         "m_x_t,m_y_t,m_x_i,m_y_i,m_v,m_delta_t,m_delta_i,m_hp,m_beta,"
         "e_x_t,e_y_t,e_psi_t,e_x_i,e_y_i,e_psi_i,e_v,"
         "mu_est,kappa_est,eta_est,beta_est,"
         "cmd_delta_t,cmd_delta_i,cmd_hp,"
         "app_delta_t,app_delta_i,app_hp,"
         "ref_x_t,ref_y_t,ref_psi_t,ref_x_i,ref_y_i,ref_psi_i,ref_v,segment,"
         "est_prep_ms,est_fb_ms,ctl_prep_ms,ctl_fb_ms,critical_ms,"
         "est_kkt,ctl_kkt,events";
}

void SimLog::write_csv(std::ostream& os) const {
  os << "# articmpc simlog v1 framework=" << framework << " dt=" << dt << "\n";
  os << header() << "\n";
  std::string line;
  for (const SimRow& r : rows) {
    line.clear();
    line += std::to_string(r.k);
    line += ',';
    append_num(line, r.t);
    const Vec7 x = r.truth.vec();
    for (int i = 0; i < 7; ++i) append_num(line, x[i]);
    append_num(line, r.mu_true);
    append_num(line, r.kappa_true);
    append_num(line, r.eta_true);
    append_num(line, r.beta_true);
    const Vec9 m = r.meas.vec();
    for (int i = 0; i < 9; ++i) append_num(line, m[i]);
    const Vec7 e = r.est.vec();
    for (int i = 0; i < 7; ++i) append_num(line, e[i]);
    append_num(line, r.mu_est);
    append_num(line, r.kappa_est);
    append_num(line, r.eta_est);
    append_num(line, r.beta_est);
    append_num(line, r.u_cmd.delta_t);
    append_num(line, r.u_cmd.delta_i);
    append_num(line, r.u_cmd.hp);
    append_num(line, r.u_applied.delta_t);
    append_num(line, r.u_applied.delta_i);
    append_num(line, r.u_applied.hp);
    append_num(line, r.ref.x_t_r);
    append_num(line, r.ref.y_t_r);
    append_num(line, r.ref.psi_t_r);
    append_num(line, r.ref.x_i_r);
    append_num(line, r.ref.y_i_r);
    append_num(line, r.ref.psi_i_r);
    append_num(line, r.ref.v_r);
    line += to_string(r.ref.segment);
    line += ',';
    append_num(line, r.est_prep_ms);
    append_num(line, r.est_fb_ms);
    append_num(line, r.ctl_prep_ms);
    append_num(line, r.ctl_fb_ms);
    append_num(line, r.critical_ms);
    append_num(line, r.est_kkt);
    append_num(line, r.ctl_kkt);
    line += r.events;
    os << line << "\n";
  }
}

SimLog SimLog::read_csv(std::istream& is) {
  SimLog log;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# articmpc simlog", 0) != 0) {
    throw ConfigError("simlog: missing header comment line");
  }
  {
    const auto fw = line.find("framework=");
    if (fw != std::string::npos) {
      const auto end = line.find(' ', fw);
      log.framework = line.substr(fw + 10, end - fw - 10);
    }
    const auto dtp = line.find("dt=");
    if (dtp != std::string::npos) {
      log.dt = std::stod(line.substr(dtp + 3));
    }
  }
  if (!std::getline(is, line) || line != header()) {
    throw ConfigError("simlog: unexpected column header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> c = split_csv(line);
    if (c.size() != 55) {
      throw ConfigError("simlog: wrong column count in row");
    }
    SimRow r;
    int i = 0;
    auto num = [&]() { return std::stod(c[i++]); };
    r.k = static_cast<int>(std::stol(c[i++]));
    r.t = num();
    Vec7 x;
    for (int j = 0; j < 7; ++j) x[j] = num();
    r.truth = VehicleState::from_vec(x);
    r.mu_true = num();
    r.kappa_true = num();
    r.eta_true = num();
    r.beta_true = num();
    Vec9 m;
    for (int j = 0; j < 9; ++j) m[j] = num();
    r.meas = Measurement::from_vec(m);
    Vec7 e;
    for (int j = 0; j < 7; ++j) e[j] = num();
    r.est = VehicleState::from_vec(e);
    r.mu_est = num();
    r.kappa_est = num();
    r.eta_est = num();
    r.beta_est = num();
    r.u_cmd = {num(), num(), num()};
    r.u_applied = {num(), num(), num()};
    r.ref.x_t_r = num();
    r.ref.y_t_r = num();
    r.ref.psi_t_r = num();
    r.ref.x_i_r = num();
    r.ref.y_i_r = num();
    r.ref.psi_i_r = num();
    r.ref.v_r = num();
    r.ref.segment =
        c[i++] == "curve" ? Segment::kCurve : Segment::kStraight;
    r.est_prep_ms = num();
    r.est_fb_ms = num();
    r.ctl_prep_ms = num();
    r.ctl_fb_ms = num();
    r.critical_ms = num();
    r.est_kkt = num();
    r.ctl_kkt = num();
    r.events = c[i++];
    log.rows.push_back(std::move(r));
  }
  return log;
}

bool SimLog::same_dynamics(const SimLog& other) const {
  if (framework != other.framework || rows.size() != other.rows.size()) {
    return false;
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    const SimRow& a = rows[i];
    const SimRow& b = other.rows[i];
    if (a.k != b.k || a.t != b.t || a.events != b.events) return false;
    if (a.truth.vec() != b.truth.vec() || a.meas.vec() != b.meas.vec() ||
        a.est.vec() != b.est.vec()) {
      return false;
    }
    if (a.mu_true != b.mu_true || a.kappa_true != b.kappa_true ||
        a.eta_true != b.eta_true || a.beta_true != b.beta_true) {
      return false;
    }
    if (a.mu_est != b.mu_est || a.kappa_est != b.kappa_est ||
        a.eta_est != b.eta_est || a.beta_est != b.beta_est) {
      return false;
    }
    if (a.u_cmd.vec() != b.u_cmd.vec() || a.u_applied.vec() != b.u_applied.vec()) {
      return false;
    }
    if (a.ref.state_vec() != b.ref.state_vec() ||
        a.ref.segment != b.ref.segment) {
      return false;
    }
    if (a.est_kkt != b.est_kkt || a.ctl_kkt != b.ctl_kkt) return false;
  }
  return true;
}

}  // namespace artic
