#include "mvp/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <queue>
#include <sstream>
#include <utility>

namespace mvp::roadnet {

const char* turn_name(Turn t) {
  switch (t) {
    case Turn::Left: return "left";
    case Turn::Right: return "right";
    case Turn::Straight: return "straight";
  }
  return "?";
}

MapError::MapError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

RoadNetwork::RoadNetwork(std::vector<Junction> junctions, std::vector<Lane> lanes)
    : junctions_(std::move(junctions)), lanes_(std::move(lanes)) {
  for (std::size_t i = 0; i < junctions_.size(); ++i) {
    if (junctions_[i].id != i)
      throw MapError("junction ids must be consecutive from 0 (got " +
                         std::to_string(junctions_[i].id) + " at position " + std::to_string(i) +
                         ")",
                     0);
  }
  for (std::size_t i = 0; i < lanes_.size(); ++i) {
    const Lane& l = lanes_[i];
    const std::string name = "lane " + std::to_string(l.id);
    if (l.id != i) throw MapError(name + ": lane ids must be consecutive from 0", 0);
    if (l.from >= junctions_.size() || l.to >= junctions_.size())
      throw MapError(name + ": references a missing junction", 0);
    if (l.from == l.to) throw MapError(name + ": starts and ends at the same junction", 0);
    if (!(l.length > 0.0) || !std::isfinite(l.length))
      throw MapError(name + ": length must be positive", 0);
  }
  build_successors();
  for (const Lane& l : lanes_) {
    if (successors(l.id).empty())
      throw MapError("lane " + std::to_string(l.id) + ": no successor lane at junction " +
                         std::to_string(l.to),
                     0);
  }
  build_hops();
  build_roads();
}

void RoadNetwork::build_successors() {
  const std::size_t L = lanes_.size();
  std::vector<std::vector<LaneId>> outgoing(junctions_.size());
  for (const Lane& l : lanes_) outgoing[l.from].push_back(l.id);

  succ_begin_.assign(L + 1, 0);
  succ_.clear();
  for (const Lane& l : lanes_) {
    succ_begin_[l.id] = succ_.size();
    const auto& out = outgoing[l.to];
    std::size_t added = 0;
    for (LaneId next : out) {
      if (lanes_[next].to == l.from) continue;  // reversal
      succ_.push_back(next);
      ++added;
    }
    if (added == 0) {
      for (LaneId next : out) succ_.push_back(next);
    }
  }
  succ_begin_[L] = succ_.size();
}

void RoadNetwork::build_hops() {
  const std::size_t L = lanes_.size();
  hops_.assign(L * L, kUnreachable);
  using Item = std::pair<double, LaneId>;
  std::vector<double> dist(L);
  for (LaneId src = 0; src < L; ++src) {
    std::fill(dist.begin(), dist.end(), kUnreachable);
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    for (LaneId s : successors(src)) {
      dist[s] = 0.0;
      open.emplace(0.0, s);
    }
    while (!open.empty()) {
      auto [d, k] = open.top();
      open.pop();
      if (d > dist[k]) continue;
      const double through = d + lanes_[k].length;
      for (LaneId m : successors(k)) {
        if (through < dist[m]) {
          dist[m] = through;
          open.emplace(through, m);
        }
      }
    }
    std::copy(dist.begin(), dist.end(), hops_.begin() + static_cast<std::ptrdiff_t>(src * L));
  }
}

void RoadNetwork::build_roads() {
  const std::size_t J = junctions_.size();
  roads_.assign(J * J, kUnreachable);
  for (std::size_t j = 0; j < J; ++j) roads_[j * J + j] = 0.0;
  for (const Lane& l : lanes_) {
    double& fwd = roads_[l.from * J + l.to];
    fwd = std::min(fwd, l.length);
    double& back = roads_[l.to * J + l.from];
    back = std::min(back, l.length);
  }
  for (std::size_t k = 0; k < J; ++k)
    for (std::size_t i = 0; i < J; ++i)
      for (std::size_t j = 0; j < J; ++j)
        roads_[i * J + j] = std::min(roads_[i * J + j], roads_[i * J + k] + roads_[k * J + j]);
}

std::span<const LaneId> RoadNetwork::successors(LaneId id) const {
  const std::size_t b = succ_begin_.at(id);
  const std::size_t e = succ_begin_.at(id + 1);
  return {succ_.data() + b, e - b};
}

double RoadNetwork::bearing(LaneId id) const {
  const Lane& l = lane(id);
  const Junction& a = junctions_[l.from];
  const Junction& b = junctions_[l.to];
  double deg = std::atan2(b.y - a.y, b.x - a.x) * 180.0 / M_PI;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

namespace {

std::optional<Turn> classify(double delta) {
  while (delta > 180.0) delta -= 360.0;
  while (delta <= -180.0) delta += 360.0;
  if (std::abs(delta) < 45.0) return Turn::Straight;
  if (delta >= 45.0 && delta < 135.0) return Turn::Left;
  if (delta > -135.0 && delta <= -45.0) return Turn::Right;
  return std::nullopt;
}

}  // namespace

std::optional<Turn> RoadNetwork::turn_between(LaneId from, LaneId to) const {
  const Lane& a = lane(from);
  const Lane& b = lane(to);
  if (b.from != a.to) return std::nullopt;
  const auto succ = successors(from);
  if (std::find(succ.begin(), succ.end(), to) == succ.end()) return std::nullopt;
  auto geometric = [&](LaneId next) -> std::optional<Turn> {
    if (lane(next).to == a.from) return std::nullopt;  // reversal
    return classify(bearing(next) - bearing(from));
  };
  if (auto t = geometric(to)) return t;
  // A lane whose exits all fall outside the three classes (a dead-end reversal,
  // a sharp fork) still needs a way on: its first exit counts as straight.
  for (LaneId next : succ)
    if (geometric(next)) return std::nullopt;
  if (succ.front() == to) return Turn::Straight;
  return std::nullopt;
}

std::optional<LaneId> RoadNetwork::successor_for(LaneId from, Turn turn) const {
  for (LaneId next : successors(from)) {
    if (turn_between(from, next) == turn) return next;
  }
  return std::nullopt;
}

bool RoadNetwork::strongly_connected() const {
  const std::size_t L = lanes_.size();
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j)
      if (hops_[i * L + j] == kUnreachable) return false;
  return true;
}

bool operator==(const RoadNetwork& a, const RoadNetwork& b) {
  if (a.junctions_.size() != b.junctions_.size() || a.lanes_.size() != b.lanes_.size())
    return false;
  for (std::size_t i = 0; i < a.junctions_.size(); ++i) {
    const auto& x = a.junctions_[i];
    const auto& y = b.junctions_[i];
    if (x.id != y.id || x.x != y.x || x.y != y.y) return false;
  }
  for (std::size_t i = 0; i < a.lanes_.size(); ++i) {
    const auto& x = a.lanes_[i];
    const auto& y = b.lanes_[i];
    if (x.id != y.id || x.from != y.from || x.to != y.to || x.length != y.length) return false;
  }
  return a.succ_ == b.succ_ && a.succ_begin_ == b.succ_begin_;
}

RoadNetwork generate_grid(std::size_t blocks_x, std::size_t blocks_y, double lane_length) {
  if (blocks_x < 1 || blocks_y < 1) throw std::invalid_argument("grid needs at least 1x1 blocks");
  if (!(lane_length > 0.0)) throw std::invalid_argument("lane length must be positive");
  const std::size_t nx = blocks_x + 1;
  const std::size_t ny = blocks_y + 1;
  std::vector<Junction> junctions;
  junctions.reserve(nx * ny);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x)
      junctions.push_back({static_cast<JunctionId>(y * nx + x), static_cast<double>(x) * lane_length,
                           static_cast<double>(y) * lane_length});

  std::vector<Lane> lanes;
  auto road = [&](std::size_t a, std::size_t b) {
    lanes.push_back({static_cast<LaneId>(lanes.size()), static_cast<JunctionId>(a),
                     static_cast<JunctionId>(b), lane_length});
    lanes.push_back({static_cast<LaneId>(lanes.size()), static_cast<JunctionId>(b),
                     static_cast<JunctionId>(a), lane_length});
  };
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t j = y * nx + x;
      if (x + 1 < nx) road(j, j + 1);
      if (y + 1 < ny) road(j, j + nx);
    }
  }
  return RoadNetwork(std::move(junctions), std::move(lanes));
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

RoadNetwork parse_map(std::istream& in) {
  enum class Stage { JunctionHeader, Junctions, LaneHeader, Lanes, Done };
  Stage stage = Stage::JunctionHeader;
  std::size_t expected = 0;
  std::vector<Junction> junctions;
  std::vector<Lane> lanes;
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    for (unsigned char c : raw)
      if (c > 0x7F) throw MapError("non-ASCII byte in map file", line_no);
    const std::string line = strip_comment(raw);
    if (blank(line)) continue;
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    auto finish = [&] {
      std::string extra;
      if (fields >> extra) throw MapError("unexpected trailing field '" + extra + "'", line_no);
    };

    switch (stage) {
      case Stage::JunctionHeader: {
        long long n = -1;
        if (tag != "junctions" || !(fields >> n) || n < 1)
          throw MapError("expected 'junctions <n>' with n >= 1", line_no);
        finish();
        expected = static_cast<std::size_t>(n);
        stage = Stage::Junctions;
        break;
      }
      case Stage::Junctions: {
        long long id = -1;
        double x = 0, y = 0;
        if (tag != "J" || !(fields >> id >> x >> y)) throw MapError("expected 'J <id> <x> <y>'", line_no);
        finish();
        if (id != static_cast<long long>(junctions.size()))
          throw MapError("junction id " + std::to_string(id) + " out of sequence", line_no);
        if (!std::isfinite(x) || !std::isfinite(y)) throw MapError("non-finite coordinate", line_no);
        junctions.push_back({static_cast<JunctionId>(id), x, y});
        if (junctions.size() == expected) stage = Stage::LaneHeader;
        break;
      }
      case Stage::LaneHeader: {
        long long m = -1;
        if (tag != "lanes" || !(fields >> m) || m < 1)
          throw MapError("expected 'lanes <m>' with m >= 1", line_no);
        finish();
        expected = static_cast<std::size_t>(m);
        stage = Stage::Lanes;
        break;
      }
      case Stage::Lanes: {
        long long id = -1, from = -1, to = -1;
        double length = 0;
        if (tag != "L" || !(fields >> id >> from >> to >> length))
          throw MapError("expected 'L <id> <from> <to> <length>'", line_no);
        finish();
        if (id != static_cast<long long>(lanes.size()))
          throw MapError("lane id " + std::to_string(id) + " out of sequence", line_no);
        const auto nj = static_cast<long long>(junctions.size());
        if (from < 0 || from >= nj || to < 0 || to >= nj)
          throw MapError("lane " + std::to_string(id) + " references a missing junction", line_no);
        lanes.push_back({static_cast<LaneId>(id), static_cast<JunctionId>(from),
                         static_cast<JunctionId>(to), length});
        if (lanes.size() == expected) stage = Stage::Done;
        break;
      }
      case Stage::Done:
        throw MapError("unexpected content after the last lane", line_no);
    }
  }
  if (stage != Stage::Done) throw MapError("unexpected end of map file", line_no);
  return RoadNetwork(std::move(junctions), std::move(lanes));
}

RoadNetwork load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MapError("cannot open map file " + path.string(), 0);
  return parse_map(in);
}

void write_map(std::ostream& out, const RoadNetwork& net) {
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "junctions " << net.junction_count() << '\n';
  for (const Junction& j : net.junctions()) out << "J " << j.id << ' ' << j.x << ' ' << j.y << '\n';
  out << "lanes " << net.lane_count() << '\n';
  for (const Lane& l : net.lanes())
    out << "L " << l.id << ' ' << l.from << ' ' << l.to << ' ' << l.length << '\n';
  out.flags(flags);
  out.precision(prec);
}

void save_map(const std::filesystem::path& path, const RoadNetwork& net) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map file " + path.string());
  out << "# road network: " << net.junction_count() << " junctions, " << net.lane_count()
      << " lanes\n";
  write_map(out, net);
}

std::vector<std::uint8_t> adjacency_matrix(const RoadNetwork& net) {
  const std::size_t L = net.lane_count();
  std::vector<std::uint8_t> rt(L * L, 0);
  for (LaneId i = 0; i < L; ++i)
    for (LaneId j : net.successors(i))
      if (j != i) rt[i * L + j] = 1;
  return rt;
}

std::size_t code_width(std::size_t lane_count) {
  std::size_t w = 0;
  while ((std::size_t{1} << w) < lane_count) ++w;
  return std::max<std::size_t>(w, 1);
}

LaneId LaneCode::decode() const {
  LaneId v = 0;
  for (std::uint8_t b : bits) v = (v << 1) | (b & 1u);
  return v;
}

std::string LaneCode::to_string() const {
  std::string s;
  for (std::uint8_t b : bits) s.push_back(b ? '1' : '0');
  return s;
}

LaneCode lane_code(LaneId lane_id, std::size_t lane_count) {
  if (lane_id >= lane_count)
    throw std::out_of_range("lane id " + std::to_string(lane_id) + " out of range for " +
                            std::to_string(lane_count) + " lanes");
  const std::size_t w = code_width(lane_count);
  LaneCode code;
  code.bits.resize(w);
  for (std::size_t i = 0; i < w; ++i) code.bits[w - 1 - i] = (lane_id >> i) & 1u;
  return code;
}

double road_distance(const RoadNetwork& net, const Location& a, const Location& b) {
  const Lane& la = net.lane(a.lane);
  const Lane& lb = net.lane(b.lane);
  double best = kUnreachable;
  if (la.from == lb.from && la.to == lb.to && la.length == lb.length)
    best = std::abs(a.offset - b.offset);
  else if (la.from == lb.to && la.to == lb.from && la.length == lb.length)
    best = std::abs(a.offset - (lb.length - b.offset));
  const std::pair<JunctionId, double> ends_a[2] = {{la.from, a.offset}, {la.to, la.length - a.offset}};
  const std::pair<JunctionId, double> ends_b[2] = {{lb.from, b.offset}, {lb.to, lb.length - b.offset}};
  for (const auto& [ja, da] : ends_a)
    for (const auto& [jb, db] : ends_b) best = std::min(best, da + net.junction_distance(ja, jb) + db);
  return best;
}

double network_distance(const RoadNetwork& net, const Location& a, const Location& b) {
  if (a.lane == b.lane && b.offset >= a.offset) return b.offset - a.offset;
  const double hop = net.path_length(a.lane, b.lane);
  if (hop == kUnreachable) return kUnreachable;
  return (net.lane(a.lane).length - a.offset) + hop + b.offset;
}

double euclidean_distance(const RoadNetwork& net, const Location& a, const Location& b) {
  auto point = [&](const Location& p) {
    const Lane& l = net.lane(p.lane);
    const Junction& s = net.junction(l.from);
    const Junction& e = net.junction(l.to);
    const double f = p.offset / l.length;
    return std::pair{s.x + f * (e.x - s.x), s.y + f * (e.y - s.y)};
  };
  const auto [ax, ay] = point(a);
  const auto [bx, by] = point(b);
  return std::hypot(ax - bx, ay - by);
}

}  // namespace mvp::roadnet
