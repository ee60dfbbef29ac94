#pragma once

// Dataset logging (.nbl files), replay onto the topic bus, and YUYV -> PPM export.

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nbpk/bridge.hpp"
#include "nbpk/topic_bus.hpp"
#include "nbpk/wire.hpp"

namespace nbpk::recorder {

inline constexpr std::array<std::uint8_t, 4> kLogMagic = {'N', 'B', 'L', 'G'};
inline constexpr std::uint8_t kLogVersion = 1;
inline constexpr std::size_t kLogHeaderSize = 16;
inline constexpr std::size_t kRecordHeaderSize = 14;

struct LogRecord {
  wire::StreamId stream_id = wire::StreamId::Image;
  std::uint64_t timestamp_us = 0;
  Bytes payload;

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

enum class LogErrc { Io, BadMagic, BadVersion, DiskFull };

struct LogError {
  LogErrc code;
  std::string detail;
};

template <class T>
using LogResult = Result<T, LogError>;

const char* to_string(LogErrc code);

struct WriterOptions {
  /// Treat the file as full once it would exceed this size. 0 means unlimited.
  std::uint64_t max_bytes = 0;
};

/// Append-only log writer. On a failed write the file is cut back to the last
/// complete record and every later append fails.
class LogWriter {
 public:
  static LogResult<LogWriter> create(const std::filesystem::path& path, std::uint64_t epoch_us,
                                     WriterOptions options = {});

  LogWriter(LogWriter&& other) noexcept;
  LogWriter& operator=(LogWriter&& other) noexcept;
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;
  ~LogWriter();

  LogResult<Ok> append(const LogRecord& record);
  LogResult<Ok> close();

  std::uint64_t records_written() const { return records_; }
  std::uint64_t bytes_written() const { return offset_; }

 private:
  LogWriter(int fd, WriterOptions options);
  bool write_all(ByteView data);

  int fd_ = -1;
  WriterOptions options_;
  std::uint64_t offset_ = 0;
  std::uint64_t records_ = 0;
  std::optional<LogError> failed_;
};

/// Sequential reader. next() yields records until end of file or the first
/// incomplete record, after which truncated() reports true.
class LogReader {
 public:
  static LogResult<LogReader> open(const std::filesystem::path& path);

  std::optional<LogRecord> next();
  bool truncated() const { return truncated_; }
  std::uint64_t epoch_us() const { return epoch_us_; }

 private:
  LogReader(Bytes data, std::uint64_t epoch_us);

  Bytes data_;
  std::size_t pos_ = kLogHeaderSize;
  std::uint64_t epoch_us_ = 0;
  bool truncated_ = false;
};

struct LogContents {
  std::uint64_t epoch_us = 0;
  std::vector<LogRecord> records;
  bool truncated = false;
};

LogResult<LogContents> read_log(const std::filesystem::path& path);

/// 12-byte ImageStartMeta followed by the pixels.
Bytes image_payload(const wire::Image& img);
wire::WireResult<wire::Image> image_from_payload(ByteView payload);

struct RecordSummary {
  std::uint64_t records = 0;
  std::uint64_t bytes = 0;
  std::optional<LogError> error;
};

/// Subscribes to the image, motion and request topics and appends every
/// message in arrival order from a dedicated writer thread.
class Recorder {
 public:
  Recorder(TopicBus& bus, LogWriter writer);
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  /// Stops observing, drains queued messages and closes the file.
  RecordSummary finish();

 private:
  void enqueue(LogRecord rec);
  void writer_loop(std::stop_token stop);

  LogWriter writer_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
  std::deque<LogRecord> queue_;
  std::optional<LogError> error_;
  bool finished_ = false;
  RecordSummary summary_;
  std::vector<Tap> taps_;
  std::jthread thread_;
};

/// Records for `duration` (or until `stop` fires) into a new log at `path`.
LogResult<RecordSummary> record(TopicBus& bus, const std::filesystem::path& path,
                                std::chrono::milliseconds duration,
                                std::stop_token stop = {});

struct ReplayOptions {
  /// Playback speed multiplier; nullopt replays as fast as possible.
  std::optional<double> speed = 1.0;
};

struct ReplaySummary {
  std::uint64_t published = 0;
  std::uint64_t skipped = 0;  // records whose payload failed to decode
  bool truncated = false;
};

/// Republishes a log on the topics it was recorded from.
LogResult<ReplaySummary> replay(const std::filesystem::path& path, TopicBus& bus,
                                ReplayOptions options = {}, std::stop_token stop = {});

struct Rgb {
  std::uint8_t r, g, b;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// BT.601 full-range conversion, clamped, rounded to nearest (ties away from zero).
Rgb yuv_to_rgb(std::uint8_t y, std::uint8_t u, std::uint8_t v);

/// Packed RGB (3 bytes per pixel) from a YUYV image with even width.
Result<Bytes, std::string> yuyv_to_rgb(const wire::Image& img);

Result<Ok, std::string> export_ppm(const wire::Image& img, const std::filesystem::path& path);

}  // namespace nbpk::recorder
