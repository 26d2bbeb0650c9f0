#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "resmet/core.hpp"
#include "resmet/csv.hpp"

namespace resmet {

enum class ColumnKind { numeric, categorical, binary, date };

enum class Discipline { shot, shot_on_target, basketball_shot, pass, injury_spell };

inline std::string to_string(Discipline d) {
  switch (d) {
    case Discipline::shot: return "shot";
    case Discipline::shot_on_target: return "shot-on-target";
    case Discipline::basketball_shot: return "basketball-shot";
    case Discipline::pass: return "pass";
    case Discipline::injury_spell: return "injury-spell";
  }
  throw DataError("unknown discipline");
}

inline Discipline discipline_from_string(const std::string& s) {
  if (s == "shot") return Discipline::shot;
  if (s == "shot-on-target") return Discipline::shot_on_target;
  if (s == "basketball-shot") return Discipline::basketball_shot;
  if (s == "pass") return Discipline::pass;
  if (s == "injury-spell") return Discipline::injury_spell;
  throw DataError("unknown discipline tag: " + s);
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
};

// Ordered feature-column descriptors; fixed columns (outcome, actor_id, ...)
// are implied by the discipline and not listed here.
struct FeatureSpec {
  std::vector<ColumnSpec> columns;

  bool has(const std::string& name) const {
    return std::any_of(columns.begin(), columns.end(),
                       [&](const ColumnSpec& c) { return c.name == name; });
  }

  // The engineered shot feature set used by the default pipelines.
  static FeatureSpec default_shot_features() {
    FeatureSpec s;
    auto cat = [&](const char* n) { s.columns.push_back({n, ColumnKind::categorical}); };
    auto num = [&](const char* n) { s.columns.push_back({n, ColumnKind::numeric}); };
    cat("shot.type.name");
    cat("shot.technique.name");
    cat("shot.body_part.name");
    num("DistToGoal");
    num("DistToKeeper");
    num("DistSGK");
    num("distance.ToD1");
    num("distance.ToD2");
    num("AngleToGoal");
    num("AngleToKeeper");
    num("AngleDeviation");
    num("angle");
    num("AttackersBehindBall");
    num("DefendersInCone");
    num("DefendersBehindBall");
    num("density");
    num("density.incone");
    return s;
  }
};

struct EventTable {
  Discipline discipline = Discipline::shot;
  std::vector<ColumnSpec> schema;  // feature columns
  std::vector<double> outcome;
  std::vector<std::string> actor_id;
  std::vector<std::string> date;          // ISO or empty
  std::vector<std::string> team_for;      // optional, empty when absent
  std::vector<std::string> team_against;  // optional
  std::vector<int> on_target;             // 1/0, -1 unknown
  std::vector<double> event_flag;         // injury tables only (delta)
  std::unordered_map<std::string, std::vector<double>> numeric_cols;
  std::unordered_map<std::string, std::vector<std::string>> cat_cols;

  std::size_t n() const { return outcome.size(); }

  const std::vector<double>& numeric(const std::string& name) const {
    auto it = numeric_cols.find(name);
    if (it == numeric_cols.end()) throw DataError("no numeric column: " + name);
    return it->second;
  }

  const std::vector<std::string>& categorical(const std::string& name) const {
    auto it = cat_cols.find(name);
    if (it == cat_cols.end()) throw DataError("no categorical column: " + name);
    return it->second;
  }

  std::size_t positives() const {
    std::size_t k = 0;
    for (double y : outcome) k += y > 0.0;
    return k;
  }
};

namespace detail {

inline bool is_fixed_shot_column(const std::string& name) {
  return name == "outcome" || name == "actor_id" || name == "date" ||
         name == "team_for" || name == "team_against" || name == "on_target";
}

}  // namespace detail

inline EventTable parse_event_table(const std::string& path,
                                    const FeatureSpec& spec,
                                    Discipline discipline) {
  csv::Table raw = csv::read_file(path);
  EventTable t;
  t.discipline = discipline;
  t.schema = spec.columns;

  const bool injury = discipline == Discipline::injury_spell;
  const std::string outcome_name = injury ? "time" : "outcome";
  int c_outcome = raw.column(outcome_name);
  if (c_outcome < 0)
    throw DataError("missing required column '" + outcome_name + "' in " + path);
  int c_actor = raw.column("actor_id");
  if (c_actor < 0) throw DataError("missing required column 'actor_id' in " + path);
  int c_event = injury ? raw.column("event") : -1;
  if (injury && c_event < 0)
    throw DataError("missing required column 'event' in " + path);
  int c_date = raw.column("date");
  int c_for = raw.column("team_for");
  int c_against = raw.column("team_against");
  int c_on_target = raw.column("on_target");

  std::vector<int> feat_cols;
  for (const auto& col : spec.columns) {
    int c = raw.column(col.name);
    if (c < 0) throw DataError("missing required column '" + col.name + "' in " + path);
    feat_cols.push_back(c);
    if (col.kind == ColumnKind::categorical)
      t.cat_cols[col.name] = {};
    else
      t.numeric_cols[col.name] = {};
  }

  for (const auto& row : raw.rows) {
    double y = csv::parse_double(row[c_outcome], outcome_name);
    if (std::isnan(y)) throw DataError("missing outcome value in " + path);
    if (!injury) {
      bool binary_outcome = discipline != Discipline::basketball_shot;
      if (binary_outcome && y != 0.0 && y != 1.0)
        throw DataError("outcome must be 0/1, got " + csv::format_double(y));
      if (discipline == Discipline::basketball_shot && y != 0.0 && y != 2.0 &&
          y != 3.0)
        throw DataError("basketball outcome must be in {0,2,3}, got " +
                        csv::format_double(y));
    } else if (y <= 0.0) {
      throw DataError("injury time must be positive");
    }
    const std::string& actor = row[c_actor];
    if (actor.empty()) throw DataError("empty actor_id in " + path);
    t.outcome.push_back(y);
    t.actor_id.push_back(actor);
    t.date.push_back(c_date >= 0 ? row[c_date] : "");
    t.team_for.push_back(c_for >= 0 ? row[c_for] : "");
    t.team_against.push_back(c_against >= 0 ? row[c_against] : "");
    if (injury) {
      double e = csv::parse_double(row[c_event], "event");
      if (e != 0.0 && e != 1.0) throw DataError("event flag must be 0/1");
      t.event_flag.push_back(e);
      t.on_target.push_back(-1);
    } else {
      int ot = -1;
      if (c_on_target >= 0 && !row[c_on_target].empty())
        ot = csv::parse_double(row[c_on_target], "on_target") != 0.0;
      t.on_target.push_back(ot);
    }
    for (std::size_t k = 0; k < spec.columns.size(); ++k) {
      const auto& col = spec.columns[k];
      const std::string& cell = row[feat_cols[k]];
      if (col.kind == ColumnKind::categorical) {
        t.cat_cols[col.name].push_back(cell);
      } else {
        double v = csv::parse_double(cell, col.name);
        if (!std::isnan(v) && !std::isfinite(v))
          throw DataError("non-finite value in column '" + col.name + "'");
        t.numeric_cols[col.name].push_back(v);
      }
    }
  }
  return t;
}

inline void write_event_table(const std::string& path, const EventTable& t) {
  csv::Table out;
  const bool injury = t.discipline == Discipline::injury_spell;
  out.header = injury
                   ? std::vector<std::string>{"time", "event", "actor_id", "date"}
                   : std::vector<std::string>{"outcome", "actor_id", "date",
                                              "team_for", "team_against",
                                              "on_target"};
  for (const auto& c : t.schema) out.header.push_back(c.name);
  for (std::size_t i = 0; i < t.n(); ++i) {
    std::vector<std::string> row;
    if (injury) {
      row = {csv::format_double(t.outcome[i]),
             csv::format_double(t.event_flag[i]), t.actor_id[i], t.date[i]};
    } else {
      row = {csv::format_double(t.outcome[i]), t.actor_id[i], t.date[i],
             t.team_for[i], t.team_against[i],
             t.on_target[i] < 0 ? "" : std::to_string(t.on_target[i])};
    }
    for (const auto& c : t.schema) {
      if (c.kind == ColumnKind::categorical)
        row.push_back(t.categorical(c.name)[i]);
      else
        row.push_back(csv::format_double(t.numeric(c.name)[i]));
    }
    out.rows.push_back(std::move(row));
  }
  csv::write_file(path, out);
}

struct GoalGeometry {
  double dist_to_goal = 0.0;
  double angle = 0.0;  // radians, subtended by the two posts
};

// Goal center at (goal_x, 0); posts at (goal_x, +-goal_width/2).
inline GoalGeometry engineer_geometry(double x, double y, double goal_x = 0.0,
                                      double goal_width = 7.32) {
  GoalGeometry g;
  double dx = goal_x - x;
  double half = goal_width / 2.0;
  g.dist_to_goal = std::hypot(dx, y);
  if (dx == 0.0) {
    // on the goal line: pi between the posts, 0 outside the frame
    g.angle = std::abs(y) < half ? std::numbers::pi : 0.0;
    return g;
  }
  double a1 = std::atan2(half - y, std::abs(dx));
  double a2 = std::atan2(-half - y, std::abs(dx));
  g.angle = a1 - a2;
  return g;
}

inline std::set<std::string> filter_cohort(const EventTable& t,
                                           std::size_t min_units,
                                           std::size_t min_positive) {
  if (min_units < 1) throw DataError("min_units must be >= 1");
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  const bool injury = t.discipline == Discipline::injury_spell;
  for (std::size_t i = 0; i < t.n(); ++i) {
    auto& c = counts[t.actor_id[i]];
    ++c.first;
    double pos = injury ? t.event_flag[i] : t.outcome[i];
    if (pos > 0.0) ++c.second;
  }
  std::set<std::string> out;
  for (const auto& [actor, c] : counts)
    if (c.first >= min_units && c.second >= min_positive) out.insert(actor);
  return out;
}

inline std::vector<double> actor_indicator(const EventTable& t,
                                           const std::string& actor) {
  std::vector<double> x(t.n(), 0.0);
  bool seen = false;
  for (std::size_t i = 0; i < t.n(); ++i) {
    if (t.actor_id[i] == actor) {
      x[i] = 1.0;
      seen = true;
    }
  }
  if (!seen) throw DataError("unknown actor id: " + actor);
  return x;
}

// Shot-on-target derivation from end-location deltas to the goal center.
inline bool on_target_from_end_location(double end_dy, double end_dz,
                                        double goal_width = 7.32,
                                        double goal_height = 2.44) {
  return std::abs(end_dy) <= goal_width / 2.0 && end_dz >= 0.0 &&
         end_dz <= goal_height;
}

struct MatchTable {
  std::vector<std::string> date;
  std::vector<std::string> home_team;
  std::vector<std::string> away_team;
  std::vector<int> home_goals;
  std::vector<int> away_goals;

  std::size_t n() const { return date.size(); }
};

inline MatchTable parse_match_table(const std::string& path) {
  csv::Table raw = csv::read_file(path);
  const char* needed[] = {"date", "home_team", "away_team", "home_goals",
                          "away_goals"};
  int idx[5];
  for (int i = 0; i < 5; ++i) {
    idx[i] = raw.column(needed[i]);
    if (idx[i] < 0)
      throw DataError(std::string("missing required column '") + needed[i] +
                      "' in " + path);
  }
  MatchTable m;
  for (const auto& row : raw.rows) {
    parse_date_days(row[idx[0]]);  // validate
    int hg = static_cast<int>(csv::parse_double(row[idx[3]], "home_goals"));
    int ag = static_cast<int>(csv::parse_double(row[idx[4]], "away_goals"));
    if (hg < 0 || ag < 0) throw DataError("negative goal count");
    m.date.push_back(row[idx[0]]);
    m.home_team.push_back(row[idx[1]]);
    m.away_team.push_back(row[idx[2]]);
    m.home_goals.push_back(hg);
    m.away_goals.push_back(ag);
  }
  return m;
}

}  // namespace resmet
