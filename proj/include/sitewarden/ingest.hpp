#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sitewarden::ingest {

// Frame-time label of shape MM:SS:mmm (zero-padded 2/2/3) or the sentinel
// "???:???:???" for names that cannot be parsed.
struct TimeLabel {
    std::string text;

    static TimeLabel sentinel() { return {"???:???:???"}; }
    bool is_sentinel() const { return text == "???:???:???"; }
    // True for well-formed non-sentinel labels (SS <= 59, mmm <= 999).
    bool valid() const;

    bool operator==(const TimeLabel&) const = default;
};

// One timestamped image sampled from the input stream; the unit every
// pipeline stage operates on.
struct Frame {
    int index = 0;
    std::int64_t capture_time_ms = 0;
    std::filesystem::path image_ref;
    std::string source_id;
};

enum class TimeSeparator { colon, underscore };

// "MM:SS:mmm" for ms < 100 minutes; throws TimeOutOfRange above that.
std::string render_time_label(std::int64_t ms, TimeSeparator sep = TimeSeparator::colon);
// Inverse of render_time_label for valid labels; -1 for sentinel/invalid.
std::int64_t time_label_to_ms(const TimeLabel& label);

// "Frame{index}-{MM:SS:mmm}.jpg" (unpadded index, zero-padded time fields).
// The underscore separator exists for filesystems that reject ':'.
std::string format_frame_filename(const Frame& frame, TimeSeparator sep = TimeSeparator::colon);

// Total function: splits on the first '-', strips the rightmost extension,
// returns the remainder as the label. No '-' present -> the sentinel.
// Underscore-separated time fields are normalized back to the canonical
// colon form so downstream stages only ever see MM:SS:mmm.
TimeLabel parse_time_from_filename(std::string_view name);

struct ExtractOptions {
    double rate_hz = 1.0;
    TimeSeparator separator = TimeSeparator::colon;
    std::string source_id;  // defaults to the video filename
};

// Samples the video at t_i = i / rate_hz for all t_i < duration and writes
// one JPEG per sample into out_dir, plus out_dir/index.jsonl with one record
// {index, capture_time_ms, time_label, file} per frame.
std::vector<Frame> extract_frames(const std::filesystem::path& video_ref,
                                  const std::filesystem::path& out_dir,
                                  const ExtractOptions& options);

// Ingests a directory of pre-extracted frames named by the filename grammar,
// ordered by parsed index. Files whose names yield the sentinel (or a
// malformed label/index) fail the whole directory with a listing.
std::vector<Frame> ingest_frame_dir(const std::filesystem::path& dir);

// Writes out/index.jsonl for an already-materialized frame sequence.
void write_frame_index(const std::filesystem::path& out_dir, const std::vector<Frame>& frames);

// Reloads frames from a previously written index.jsonl. Returns nothing if
// the index is absent, unreadable, or references missing image files — the
// caller re-extracts in that case. The index is written only after a
// complete extraction, so a loaded sequence is always whole.
std::optional<std::vector<Frame>> load_frame_index(const std::filesystem::path& dir);

}  // namespace sitewarden::ingest
