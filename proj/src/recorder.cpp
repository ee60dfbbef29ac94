#include "nbpk/recorder.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>

#include "nbpk/clock.hpp"

namespace nbpk::recorder {

namespace {

Unexpected<LogError> fail(LogErrc code, std::string detail) {
  return unexpected(LogError{code, std::move(detail)});
}

bool known_stream(std::uint8_t v) { return v >= 1 && v <= 3; }

}  // namespace

const char* to_string(LogErrc code) {
  switch (code) {
    case LogErrc::Io: return "Io";
    case LogErrc::BadMagic: return "BadMagic";
    case LogErrc::BadVersion: return "BadVersion";
    case LogErrc::DiskFull: return "DiskFull";
  }
  return "Unknown";
}

// ---------------------------------------------------------------------------
// Writer

LogWriter::LogWriter(int fd, WriterOptions options) : fd_(fd), options_(options) {}

LogWriter::LogWriter(LogWriter&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)),
      options_(other.options_),
      offset_(other.offset_),
      records_(other.records_),
      failed_(std::move(other.failed_)) {}

LogWriter& LogWriter::operator=(LogWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
    options_ = other.options_;
    offset_ = other.offset_;
    records_ = other.records_;
    failed_ = std::move(other.failed_);
  }
  return *this;
}

LogWriter::~LogWriter() {
  if (fd_ >= 0) ::close(fd_);
}

LogResult<LogWriter> LogWriter::create(const std::filesystem::path& path, std::uint64_t epoch_us,
                                       WriterOptions options) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) return fail(LogErrc::Io, "cannot open " + path.string() + ": " + std::strerror(errno));
  LogWriter writer(fd, options);
  Bytes header;
  ByteWriter w(header);
  w.put_bytes(kLogMagic);
  w.put(kLogVersion);
  w.put_bytes(std::array<std::uint8_t, 3>{});
  w.put(epoch_us);
  if (!writer.write_all(header))
    return fail(LogErrc::Io, "cannot write log header: " + std::string(std::strerror(errno)));
  writer.offset_ = header.size();
  return writer;
}

bool LogWriter::write_all(ByteView data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

LogResult<Ok> LogWriter::append(const LogRecord& record) {
  if (failed_) return unexpected(*failed_);
  if (fd_ < 0) return fail(LogErrc::Io, "log is closed");
  if (record.payload.size() > 0xFFFFFFFFull) return fail(LogErrc::Io, "payload too large");
  Bytes buf;
  buf.reserve(kRecordHeaderSize + record.payload.size());
  ByteWriter w(buf);
  w.put(static_cast<std::uint8_t>(record.stream_id));
  w.put(std::uint8_t{0});
  w.put(static_cast<std::uint32_t>(record.payload.size()));
  w.put(record.timestamp_us);
  w.put_bytes(record.payload);

  if (options_.max_bytes != 0 && offset_ + buf.size() > options_.max_bytes) {
    failed_ = LogError{LogErrc::DiskFull, "log size limit reached after " +
                                              std::to_string(records_) + " records"};
    return unexpected(*failed_);
  }
  if (!write_all(buf)) {
    const int err = errno;
    // Cut back to the last complete record so the file stays a valid log.
    if (::ftruncate(fd_, static_cast<off_t>(offset_)) == 0) ::lseek(fd_, static_cast<off_t>(offset_), SEEK_SET);
    failed_ = LogError{err == ENOSPC || err == EFBIG || err == EDQUOT ? LogErrc::DiskFull : LogErrc::Io,
                       std::string("write failed: ") + std::strerror(err) + "; kept " +
                           std::to_string(records_) + " complete records"};
    return unexpected(*failed_);
  }
  offset_ += buf.size();
  ++records_;
  return Ok{};
}

LogResult<Ok> LogWriter::close() {
  if (fd_ < 0) return Ok{};
  const int rc = ::fsync(fd_);
  const int err = errno;
  ::close(std::exchange(fd_, -1));
  // fsync is unsupported on some special files; that is not a data-loss signal.
  if (rc != 0 && err != EINVAL && err != EROFS)
    return fail(LogErrc::Io, std::string("fsync failed: ") + std::strerror(err));
  if (failed_) return unexpected(*failed_);
  return Ok{};
}

// ---------------------------------------------------------------------------
// Reader

LogReader::LogReader(Bytes data, std::uint64_t epoch_us)
    : data_(std::move(data)), epoch_us_(epoch_us) {}

LogResult<LogReader> LogReader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(LogErrc::Io, "cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < kLogMagic.size() || !std::equal(kLogMagic.begin(), kLogMagic.end(), data.begin()))
    return fail(LogErrc::BadMagic, "not an NBLG log");
  if (data.size() < kLogHeaderSize) return fail(LogErrc::BadMagic, "log header truncated");
  if (data[4] != kLogVersion) return fail(LogErrc::BadVersion, "unsupported log version");
  std::uint64_t epoch = 0;
  std::memcpy(&epoch, data.data() + 8, sizeof(epoch));
  return LogReader(std::move(data), epoch);
}

std::optional<LogRecord> LogReader::next() {
  if (truncated_ || pos_ == data_.size()) return std::nullopt;
  ByteReader r(ByteView(data_).subspan(pos_));
  std::uint8_t stream = 0, reserved = 0;
  std::uint32_t len = 0;
  LogRecord rec;
  if (!r.get(stream) || !r.get(reserved) || !r.get(len) || !r.get(rec.timestamp_us) ||
      r.remaining() < len || !known_stream(stream)) {
    truncated_ = true;
    return std::nullopt;
  }
  rec.stream_id = static_cast<wire::StreamId>(stream);
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(pos_ + kRecordHeaderSize);
  rec.payload.assign(begin, begin + len);
  pos_ += kRecordHeaderSize + len;
  return rec;
}

LogResult<LogContents> read_log(const std::filesystem::path& path) {
  auto reader = LogReader::open(path);
  if (!reader) return unexpected(reader.error());
  LogContents out;
  out.epoch_us = reader->epoch_us();
  while (auto rec = reader->next()) out.records.push_back(std::move(*rec));
  out.truncated = reader->truncated();
  return out;
}

Bytes image_payload(const wire::Image& img) {
  wire::ImageStartMeta meta;
  meta.total_len = static_cast<std::uint32_t>(img.pixels.size());
  meta.width = img.width;
  meta.height = img.height;
  meta.encoding = img.encoding;
  Bytes out;
  out.reserve(wire::kStartMetaSize + img.pixels.size());
  if (auto m = wire::encode_start_meta(meta)) {
    out.insert(out.end(), m->begin(), m->end());
  } else {
    // Unencodable metadata still produces a record the reader can skip.
    out.resize(wire::kStartMetaSize, 0);
  }
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

wire::WireResult<wire::Image> image_from_payload(ByteView payload) {
  auto meta = wire::decode_start_meta(payload);
  if (!meta) return unexpected(meta.error());
  const auto pixels = payload.subspan(wire::kStartMetaSize);
  if (pixels.size() != meta->total_len)
    return unexpected(wire::Error{wire::Errc::LengthMismatch, "pixel count disagrees with meta"});
  wire::Image img;
  img.width = meta->width;
  img.height = meta->height;
  img.encoding = meta->encoding;
  img.pixels.assign(pixels.begin(), pixels.end());
  return img;
}

// ---------------------------------------------------------------------------
// Recorder

Recorder::Recorder(TopicBus& bus, LogWriter writer) : writer_(std::move(writer)) {
  thread_ = std::jthread([this](std::stop_token st) { writer_loop(st); });
  taps_.push_back(bus.tap<bridge::ImageMsg>(bridge::kImageTopic, [this](const bridge::ImageMsg& m) {
    enqueue({wire::StreamId::Image, m.receive_time_us, image_payload(m.value)});
  }));
  taps_.push_back(bus.tap<bridge::MotionMsg>(bridge::kMotionTopic, [this](const bridge::MotionMsg& m) {
    if (auto payload = wire::encode_motion(m.value))
      enqueue({wire::StreamId::Motion, m.receive_time_us, std::move(*payload)});
  }));
  taps_.push_back(bus.tap<wire::MotionRequest>(bridge::kRequestTopic, [this](const wire::MotionRequest& r) {
    if (auto payload = wire::encode_request(r))
      enqueue({wire::StreamId::Command, now_us(), Bytes(payload->begin(), payload->end())});
  }));
}

Recorder::~Recorder() { finish(); }

void Recorder::enqueue(LogRecord rec) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(rec));
  }
  cv_.notify_one();
}

void Recorder::writer_loop(std::stop_token stop) {
  std::unique_lock lock(mutex_);
  for (;;) {
    cv_.wait(lock, stop, [&] { return !queue_.empty(); });
    while (!queue_.empty()) {
      LogRecord rec = std::move(queue_.front());
      queue_.pop_front();
      if (error_) continue;
      lock.unlock();
      auto ok = writer_.append(rec);
      lock.lock();
      if (!ok) {
        error_ = ok.error();
        spdlog::error("recorder: {}", ok.error().detail);
      }
    }
    if (stop.stop_requested()) return;
  }
}

RecordSummary Recorder::finish() {
  if (finished_) return summary_;
  finished_ = true;
  taps_.clear();  // waits for in-flight callbacks
  thread_.request_stop();
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  auto closed = writer_.close();
  summary_.records = writer_.records_written();
  summary_.bytes = writer_.bytes_written();
  if (error_) {
    summary_.error = error_;
  } else if (!closed) {
    summary_.error = closed.error();
  }
  return summary_;
}

LogResult<RecordSummary> record(TopicBus& bus, const std::filesystem::path& path,
                                std::chrono::milliseconds duration, std::stop_token stop) {
  auto writer = LogWriter::create(path, wall_clock_us());
  if (!writer) return unexpected(writer.error());
  Recorder recorder(bus, std::move(*writer));
  std::mutex m;
  std::condition_variable_any cv;
  {
    std::unique_lock lock(m);
    cv.wait_for(lock, stop, duration, [] { return false; });
  }
  return recorder.finish();
}

// ---------------------------------------------------------------------------
// Replay

LogResult<ReplaySummary> replay(const std::filesystem::path& path, TopicBus& bus,
                                ReplayOptions options, std::stop_token stop) {
  auto reader = LogReader::open(path);
  if (!reader) return unexpected(reader.error());
  using clock = std::chrono::steady_clock;
  ReplaySummary summary;
  std::optional<std::uint64_t> first_ts;
  const auto start = clock::now();
  std::uint32_t image_seq = 0, motion_seq = 0;
  std::mutex m;
  std::condition_variable_any cv;

  while (auto rec = reader->next()) {
    if (stop.stop_requested()) break;
    if (!first_ts) first_ts = rec->timestamp_us;
    if (options.speed && *options.speed > 0.0 && rec->timestamp_us > *first_ts) {
      const double offset_s = static_cast<double>(rec->timestamp_us - *first_ts) * 1e-6 / *options.speed;
      const auto due = start + std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(offset_s));
      std::unique_lock lock(m);
      cv.wait_until(lock, stop, due, [] { return false; });
    }
    switch (rec->stream_id) {
      case wire::StreamId::Image: {
        auto img = image_from_payload(rec->payload);
        if (!img) {
          ++summary.skipped;
          continue;
        }
        img->seq = image_seq++;
        img->timestamp_us = rec->timestamp_us;
        bus.publish(bridge::kImageTopic, bridge::ImageMsg{std::move(*img), now_us()});
        break;
      }
      case wire::StreamId::Motion: {
        auto reading = wire::decode_motion(rec->payload);
        if (!reading) {
          ++summary.skipped;
          continue;
        }
        reading->seq = motion_seq++;
        reading->timestamp_us = rec->timestamp_us;
        bus.publish(bridge::kMotionTopic, bridge::MotionMsg{std::move(*reading), now_us()});
        break;
      }
      case wire::StreamId::Command: {
        auto req = wire::decode_request(rec->payload);
        if (!req) {
          ++summary.skipped;
          continue;
        }
        bus.publish(bridge::kRequestTopic, *req);
        break;
      }
    }
    ++summary.published;
  }
  summary.truncated = reader->truncated();
  return summary;
}

// ---------------------------------------------------------------------------
// Colour conversion

Rgb yuv_to_rgb(std::uint8_t y, std::uint8_t u, std::uint8_t v) {
  const double yy = y;
  const double cb = static_cast<double>(u) - 128.0;
  const double cr = static_cast<double>(v) - 128.0;
  auto to_byte = [](double x) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 255.0)));
  };
  return {to_byte(yy + 1.402 * cr), to_byte(yy - 0.344136 * cb - 0.714136 * cr),
          to_byte(yy + 1.772 * cb)};
}

Result<Bytes, std::string> yuyv_to_rgb(const wire::Image& img) {
  if (img.encoding != wire::Encoding::Yuv422) return unexpected(std::string("image is not YUV422"));
  if (img.width % 2 != 0) return unexpected(std::string("YUV422 requires an even width"));
  const std::size_t pixels = std::size_t{img.width} * img.height;
  if (img.pixels.size() != pixels * 2)
    return unexpected(std::string("pixel buffer does not match dimensions"));
  Bytes rgb;
  rgb.reserve(pixels * 3);
  for (std::size_t i = 0; i + 4 <= img.pixels.size(); i += 4) {
    const auto y0 = img.pixels[i], u = img.pixels[i + 1], y1 = img.pixels[i + 2], v = img.pixels[i + 3];
    for (auto y : {y0, y1}) {
      const auto c = yuv_to_rgb(y, u, v);
      rgb.insert(rgb.end(), {c.r, c.g, c.b});
    }
  }
  return rgb;
}

Result<Ok, std::string> export_ppm(const wire::Image& img, const std::filesystem::path& path) {
  auto rgb = yuyv_to_rgb(img);
  if (!rgb) return unexpected(rgb.error());
  std::ofstream out(path, std::ios::binary);
  if (!out) return unexpected("cannot open " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb->data()), static_cast<std::streamsize>(rgb->size()));
  if (!out) return unexpected("write failed for " + path.string());
  return Ok{};
}

}  // namespace nbpk::recorder
