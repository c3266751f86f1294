#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "impulse/errors.hpp"
#include "impulse/rng.hpp"

namespace impulse {

// One DVS event: pixel coordinate, timestamp, brightness polarity.
struct EventRecord {
  int x = 0;
  int y = 0;
  std::int64_t t_us = 0;
  int polarity = 1;  // -1 decrease, +1 increase
};

// Polarity channel layout: channel 0 set = decrease ("10"),
// channel 1 set = increase ("01"), neither = no event ("00").
// (1,1) is never produced.
class EventFrame {
 public:
  EventFrame() = default;
  EventFrame(int height, int width)
      : height_(height), width_(width),
        bits_(static_cast<std::size_t>(height) * width * 2, 0) {
    if (height <= 0 || width <= 0)
      throw config_error("EventFrame: dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t bit_count() const { return bits_.size(); }

  std::uint8_t bit(int y, int x, int ch) const {
    return bits_[index(y, x, ch)];
  }
  void set_bit(int y, int x, int ch, std::uint8_t v) {
    bits_[index(y, x, ch)] = v ? 1 : 0;
  }

  // Overwrites the pixel with the given polarity (last event wins).
  void set_polarity(int y, int x, int polarity) {
    const std::size_t base = index(y, x, 0);
    bits_[base] = polarity < 0 ? 1 : 0;
    bits_[base + 1] = polarity > 0 ? 1 : 0;
  }

  std::span<const std::uint8_t> raw() const { return bits_; }
  std::span<std::uint8_t> raw() { return bits_; }

  bool operator==(const EventFrame& o) const {
    return height_ == o.height_ && width_ == o.width_ && bits_ == o.bits_;
  }

  // No pixel may carry both polarities.
  bool channel_pairs_valid() const {
    for (std::size_t i = 0; i + 1 < bits_.size(); i += 2)
      if (bits_[i] && bits_[i + 1]) return false;
    return true;
  }

  std::size_t ones() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

 private:
  std::size_t index(int y, int x, int ch) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 2 + ch;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// K disjoint tiles covering a frame, row-major over the sqrt(K) x sqrt(K)
// grid. Tile k spans rows [floor(k/g)*th, ...) and cols [(k mod g)*tw, ...).
struct TileSet {
  int grid = 1;     // sqrt(K)
  int tile_h = 0;
  int tile_w = 0;
  std::vector<EventFrame> tiles;

  int user_count() const { return grid * grid; }
};

// Vectorized tile: length 2*tile_h*tile_w, row-major over pixels with the
// polarity channel fastest.
struct BitStream {
  int user = 0;
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t ones() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

namespace detail {
inline int isqrt_exact(int k) {
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
  return (r * r == k) ? r : -1;
}
}  // namespace detail

// Accumulates a time-sorted event stream into frames of window dt_us.
// Windows count from t = 0; the latest event at a pixel wins within a window.
// Always yields at least one frame.
inline std::vector<EventFrame> accumulate_events(
    std::span<const EventRecord> stream, std::int64_t dt_us, int height,
    int width) {
  if (dt_us <= 0) throw config_error("accumulate_events: window must be > 0");
  std::int64_t t_last = 0;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const EventRecord& e = stream[i];
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height)
      throw structural_error("accumulate_events: record " + std::to_string(i) +
                             " out of range (" + std::to_string(e.x) + "," +
                             std::to_string(e.y) + ")");
    if (e.polarity != -1 && e.polarity != 1)
      throw structural_error("accumulate_events: record " + std::to_string(i) +
                             " has invalid polarity");
    if (e.t_us < t_last)
      throw structural_error("accumulate_events: record " + std::to_string(i) +
                             " breaks time ordering");
    t_last = e.t_us;
  }
  const std::size_t windows =
      stream.empty() ? 1 : static_cast<std::size_t>(t_last / dt_us) + 1;
  std::vector<EventFrame> frames(windows, EventFrame(height, width));
  for (const EventRecord& e : stream) {
    const std::size_t w = static_cast<std::size_t>(e.t_us / dt_us);
    frames[w].set_polarity(e.y, e.x, e.polarity);
  }
  return frames;
}

// Splits a frame into K tiles. K must be a perfect square dividing both
// dimensions.
inline TileSet tile_frame(const EventFrame& frame, int users) {
  const int g = detail::isqrt_exact(users);
  if (g <= 0)
    throw config_error("tile_frame: K must be a positive perfect square");
  if (frame.height() % g != 0 || frame.width() % g != 0)
    throw config_error("tile_frame: frame dimensions not divisible by sqrt(K)");
  TileSet out;
  out.grid = g;
  out.tile_h = frame.height() / g;
  out.tile_w = frame.width() / g;
  out.tiles.reserve(users);
  for (int k = 0; k < users; ++k) {
    const int row0 = (k / g) * out.tile_h;
    const int col0 = (k % g) * out.tile_w;
    EventFrame tile(out.tile_h, out.tile_w);
    for (int y = 0; y < out.tile_h; ++y)
      for (int x = 0; x < out.tile_w; ++x)
        for (int ch = 0; ch < 2; ++ch)
          tile.set_bit(y, x, ch, frame.bit(row0 + y, col0 + x, ch));
    out.tiles.push_back(std::move(tile));
  }
  return out;
}

// Tile -> bit stream. Scan order: row-major over pixels, channel fastest;
// this matches EventFrame's internal layout.
inline BitStream vectorize_tile(const EventFrame& tile, int user = 0) {
  BitStream s;
  s.user = user;
  s.bits.assign(tile.raw().begin(), tile.raw().end());
  return s;
}

inline EventFrame devectorize_tile(const BitStream& stream, int tile_h,
                                   int tile_w) {
  if (stream.bits.size() != static_cast<std::size_t>(tile_h) * tile_w * 2)
    throw structural_error("devectorize_tile: stream length " +
                           std::to_string(stream.bits.size()) +
                           " does not match 2*" + std::to_string(tile_h) + "*" +
                           std::to_string(tile_w));
  EventFrame tile(tile_h, tile_w);
  std::copy(stream.bits.begin(), stream.bits.end(), tile.raw().begin());
  return tile;
}

// Reassembles K per-user bit streams (tile order) into a full frame.
inline EventFrame assemble_frame(std::span<const BitStream> streams, int users,
                                 int tile_h, int tile_w) {
  const int g = detail::isqrt_exact(users);
  if (g <= 0)
    throw config_error("assemble_frame: K must be a positive perfect square");
  if (streams.size() != static_cast<std::size_t>(users))
    throw structural_error("assemble_frame: expected " +
                           std::to_string(users) + " streams, got " +
                           std::to_string(streams.size()));
  EventFrame frame(tile_h * g, tile_w * g);
  for (int k = 0; k < users; ++k) {
    const EventFrame tile = devectorize_tile(streams[k], tile_h, tile_w);
    const int row0 = (k / g) * tile_h;
    const int col0 = (k % g) * tile_w;
    for (int y = 0; y < tile_h; ++y)
      for (int x = 0; x < tile_w; ++x)
        for (int ch = 0; ch < 2; ++ch)
          frame.set_bit(row0 + y, col0 + x, ch, tile.bit(y, x, ch));
  }
  return frame;
}

inline EventFrame assemble_frame(const TileSet& tiles) {
  std::vector<BitStream> streams;
  streams.reserve(tiles.tiles.size());
  for (std::size_t k = 0; k < tiles.tiles.size(); ++k)
    streams.push_back(vectorize_tile(tiles.tiles[k], static_cast<int>(k)));
  return assemble_frame(streams, tiles.user_count(), tiles.tile_h,
                        tiles.tile_w);
}

// Random sparse frame with BIT-level activation rate p (the detector's
// prior). An active pixel sets exactly one of its two bits, so the pixel
// activation probability is min(2p, 1); p > 0.5 saturates at bit rate 0.5.
inline EventFrame synth_sparse_frame(double p, int height, int width,
                                     std::uint64_t seed) {
  if (p < 0.0 || p > 1.0)
    throw config_error("synth_sparse_frame: p must be in [0,1]");
  EventFrame frame(height, width);
  Rng rng(seed);
  const double pixel_rate = std::min(2.0 * p, 1.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (rng.bernoulli(pixel_rate)) frame.set_polarity(y, x, rng.sign());
  return frame;
}

// Text event-stream format: one record per line, "x y t rho" in ASCII
// decimal, '#' starts a comment.
inline std::vector<EventRecord> parse_event_stream(std::istream& in) {
  std::vector<EventRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    EventRecord e;
    if (!(ls >> e.x)) continue;  // blank line
    if (!(ls >> e.y >> e.t_us >> e.polarity))
      throw parse_error("event stream line " + std::to_string(line_no) +
                        ": expected 'x y t rho'");
    std::string extra;
    if (ls >> extra)
      throw parse_error("event stream line " + std::to_string(line_no) +
                        ": trailing content '" + extra + "'");
    if (e.polarity != -1 && e.polarity != 1)
      throw parse_error("event stream line " + std::to_string(line_no) +
                        ": rho must be -1 or +1");
    records.push_back(e);
  }
  return records;
}

// Flat binary frame dump: H*W*2 bytes, row-major, channel fastest.
inline void write_frame_binary(std::ostream& out, const EventFrame& frame) {
  out.write(reinterpret_cast<const char*>(frame.raw().data()),
            static_cast<std::streamsize>(frame.bit_count()));
}

inline EventFrame read_frame_binary(std::istream& in, int height, int width) {
  EventFrame frame(height, width);
  in.read(reinterpret_cast<char*>(frame.raw().data()),
          static_cast<std::streamsize>(frame.bit_count()));
  if (static_cast<std::size_t>(in.gcount()) != frame.bit_count())
    throw structural_error("read_frame_binary: truncated input");
  return frame;
}

}  // namespace impulse
