#include "sialign/midi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>

#include "sialign/error.hpp"

namespace sialign {

double ScoreTrack::end_time_s() const {
    double end = 0.0;
    for (const NoteEvent& e : events) end = std::max(end, e.onset_s + e.duration_s);
    return end;
}

std::vector<double> ScoreTrack::onset_times() const {
    std::vector<double> t;
    t.reserve(events.size());
    for (const NoteEvent& e : events) t.push_back(e.onset_s);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-9; }),
            t.end());
    return t;
}

namespace {

// Converts ticks to seconds by integrating the tempo map piecewise.
class TickClock {
public:
    TickClock(const std::vector<TempoChange>& tempo_map, int tpq) : tpq_(tpq) {
        double seconds = 0.0;
        long prev_tick = 0;
        int prev_uspq = 500000;
        bool first = true;
        for (const TempoChange& tc : tempo_map) {
            if (!first)
                seconds += ticks_to_s(tc.tick - prev_tick, prev_uspq);
            segments_.push_back({tc.tick, seconds, tc.us_per_quarter});
            prev_tick = tc.tick;
            prev_uspq = tc.us_per_quarter;
            first = false;
        }
        if (segments_.empty()) segments_.push_back({0, 0.0, 500000});
    }

    double seconds_at(long tick) const {
        const Segment& s = segment_for_tick(tick);
        return s.seconds + ticks_to_s(tick - s.tick, s.uspq);
    }

    long ticks_at(double seconds) const {
        const Segment* seg = &segments_.front();
        for (const Segment& s : segments_) {
            if (s.seconds <= seconds) seg = &s;
            else break;
        }
        const double dt = seconds - seg->seconds;
        return seg->tick +
               std::lround(dt * 1e6 * tpq_ / static_cast<double>(seg->uspq));
    }

private:
    struct Segment {
        long tick;
        double seconds;
        int uspq;
    };

    double ticks_to_s(long ticks, int uspq) const {
        return static_cast<double>(ticks) * uspq / (1e6 * tpq_);
    }

    const Segment& segment_for_tick(long tick) const {
        const Segment* seg = &segments_.front();
        for (const Segment& s : segments_) {
            if (s.tick <= tick) seg = &s;
            else break;
        }
        return *seg;
    }

    std::vector<Segment> segments_;
    int tpq_;
};

struct ByteReader {
    const std::uint8_t* p;
    std::size_t size;
    std::size_t pos = 0;
    std::string path;

    bool eof() const { return pos >= size; }

    std::uint8_t u8() {
        if (pos + 1 > size) raise(ErrorKind::format, "truncated midi data: " + path);
        return p[pos++];
    }

    std::uint32_t u16be() {
        std::uint32_t hi = u8();
        return (hi << 8) | u8();
    }

    std::uint32_t u32be() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | u8();
        return v;
    }

    std::uint32_t varlen() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7F);
            if (!(b & 0x80)) return v;
        }
        raise(ErrorKind::format, "midi variable-length value too long: " + path);
    }

    void skip(std::uint32_t n) {
        if (pos + n > size) raise(ErrorKind::format, "truncated midi data: " + path);
        pos += n;
    }
};

struct RawNote {
    long on_tick;
    long off_tick; // -1 while open
    int pitch;
    int velocity;
};

} // namespace

ScoreTrack parse_midi(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::io, "cannot open midi file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());

    ByteReader r{bytes.data(), bytes.size(), 0, path};
    if (bytes.size() < 14 || std::memcmp(bytes.data(), "MThd", 4) != 0)
        raise(ErrorKind::format, "not a standard midi file: " + path);
    r.pos = 4;
    const std::uint32_t header_len = r.u32be();
    if (header_len < 6) raise(ErrorKind::format, "midi header chunk too short");
    const std::uint32_t format = r.u16be();
    const std::uint32_t ntrks = r.u16be();
    const std::uint32_t division = r.u16be();
    r.skip(header_len - 6);

    if (format > 1)
        raise(ErrorKind::unsupported, "midi format " + std::to_string(format) +
                                          " not supported (expected 0 or 1)");
    if (division & 0x8000)
        raise(ErrorKind::unsupported, "SMPTE time division not supported");
    if (division == 0) raise(ErrorKind::format, "midi division is zero");

    std::vector<TempoChange> tempo_events;
    std::vector<RawNote> notes;

    for (std::uint32_t trk = 0; trk < ntrks; ++trk) {
        if (r.pos + 8 > r.size)
            raise(ErrorKind::format, "missing track chunk " + std::to_string(trk));
        if (std::memcmp(r.p + r.pos, "MTrk", 4) != 0)
            raise(ErrorKind::format, "malformed track chunk header");
        r.pos += 4;
        const std::uint32_t track_len = r.u32be();
        const std::size_t track_end = r.pos + track_len;
        if (track_end > r.size)
            raise(ErrorKind::format, "track chunk overruns file: " + path);

        long tick = 0;
        std::uint8_t running_status = 0;
        // FIFO per (channel, pitch): earliest unmatched note-on closes first
        std::map<int, std::deque<std::size_t>> open_notes;
        long track_last_tick = 0;

        while (r.pos < track_end) {
            tick += r.varlen();
            track_last_tick = std::max(track_last_tick, tick);
            std::uint8_t status = r.u8();
            if (status < 0x80) {
                if (running_status == 0)
                    raise(ErrorKind::format, "midi data byte without running status");
                --r.pos;
                status = running_status;
            }

            if (status == 0xFF) { // meta
                const std::uint8_t type = r.u8();
                const std::uint32_t len = r.varlen();
                if (type == 0x51 && len == 3) {
                    const int uspq = (r.u8() << 16) | (r.u8() << 8) | r.u8();
                    tempo_events.push_back({tick, uspq});
                } else {
                    r.skip(len);
                }
                if (type == 0x2F) break; // end of track
                continue;
            }
            if (status == 0xF0 || status == 0xF7) { // sysex
                r.skip(r.varlen());
                running_status = 0;
                continue;
            }

            running_status = status;
            const int kind = status >> 4;
            const int channel = status & 0x0F;
            switch (kind) {
            case 0x9: { // note on (velocity 0 acts as note off)
                const int pitch = r.u8() & 0x7F;
                const int vel = r.u8() & 0x7F;
                const int key = (channel << 8) | pitch;
                if (vel > 0) {
                    open_notes[key].push_back(notes.size());
                    notes.push_back({tick, -1, pitch, vel});
                } else if (!open_notes[key].empty()) {
                    notes[open_notes[key].front()].off_tick = tick;
                    open_notes[key].pop_front();
                }
                break;
            }
            case 0x8: { // note off
                const int pitch = r.u8() & 0x7F;
                r.u8(); // release velocity
                const int key = (channel << 8) | pitch;
                if (!open_notes[key].empty()) {
                    notes[open_notes[key].front()].off_tick = tick;
                    open_notes[key].pop_front();
                }
                break;
            }
            case 0xA:
            case 0xB:
            case 0xE:
                r.skip(2);
                break;
            case 0xC:
            case 0xD:
                r.skip(1);
                break;
            default:
                raise(ErrorKind::format, "unexpected midi status byte");
            }
        }
        r.pos = track_end;

        for (auto& [key, queue] : open_notes) {
            for (std::size_t idx : queue) {
                notes[idx].off_tick = track_last_tick;
                if (warnings)
                    warnings->push_back("unresolved note-on (pitch " +
                                        std::to_string(notes[idx].pitch) +
                                        ") clipped at track end");
            }
        }
    }

    std::sort(tempo_events.begin(), tempo_events.end(),
              [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    std::vector<TempoChange> tempo_map;
    for (const TempoChange& tc : tempo_events) {
        if (!tempo_map.empty() && tempo_map.back().tick == tc.tick)
            tempo_map.back() = tc;
        else
            tempo_map.push_back(tc);
    }
    if (tempo_map.empty() || tempo_map.front().tick != 0)
        tempo_map.insert(tempo_map.begin(), TempoChange{0, 500000});

    ScoreTrack track;
    track.ticks_per_quarter = static_cast<int>(division);
    track.tempo_map = tempo_map;
    const TickClock clock(tempo_map, track.ticks_per_quarter);

    const double min_duration = 0.5 * clock.seconds_at(1); // half a tick
    for (const RawNote& n : notes) {
        NoteEvent e;
        e.onset_s = clock.seconds_at(n.on_tick);
        const long off = n.off_tick < 0 ? n.on_tick : n.off_tick;
        e.duration_s = std::max(clock.seconds_at(off) - e.onset_s,
                                std::max(min_duration, 1e-6));
        e.pitch = n.pitch;
        e.velocity = n.velocity;
        track.events.push_back(e);
    }
    std::stable_sort(track.events.begin(), track.events.end(),
                     [](const NoteEvent& a, const NoteEvent& b) {
                         return a.onset_s < b.onset_s;
                     });
    return track;
}

void write_midi(const ScoreTrack& track, const std::string& path) {
    const int tpq = track.ticks_per_quarter;
    if (tpq <= 0) raise(ErrorKind::invalid_argument, "ticks_per_quarter must be positive");
    const TickClock clock(track.tempo_map, tpq);

    struct WireEvent {
        long tick;
        int order; // tempo first, then note-offs, then note-ons
        std::vector<std::uint8_t> bytes;
    };
    std::vector<WireEvent> wire;

    for (const TempoChange& tc : track.tempo_map) {
        const std::uint32_t uspq = static_cast<std::uint32_t>(tc.us_per_quarter);
        wire.push_back({tc.tick, 0,
                        {0xFF, 0x51, 0x03, static_cast<std::uint8_t>((uspq >> 16) & 0xFF),
                         static_cast<std::uint8_t>((uspq >> 8) & 0xFF),
                         static_cast<std::uint8_t>(uspq & 0xFF)}});
    }
    long last_tick = 0;
    for (const NoteEvent& e : track.events) {
        const long on = clock.ticks_at(e.onset_s);
        long off = clock.ticks_at(e.onset_s + e.duration_s);
        if (off <= on) off = on + 1;
        last_tick = std::max(last_tick, off);
        const std::uint8_t pitch = static_cast<std::uint8_t>(e.pitch & 0x7F);
        const std::uint8_t vel =
            static_cast<std::uint8_t>(std::clamp(e.velocity, 1, 127));
        wire.push_back({on, 2, {0x90, pitch, vel}});
        wire.push_back({off, 1, {0x80, pitch, 0x40}});
    }
    std::stable_sort(wire.begin(), wire.end(), [](const WireEvent& a, const WireEvent& b) {
        return a.tick != b.tick ? a.tick < b.tick : a.order < b.order;
    });

    std::vector<std::uint8_t> body;
    auto put_varlen = [&body](long value) {
        std::uint32_t v = static_cast<std::uint32_t>(value);
        std::uint8_t chunk[4];
        int n = 0;
        do {
            chunk[n++] = static_cast<std::uint8_t>(v & 0x7F);
            v >>= 7;
        } while (v && n < 4);
        for (int i = n - 1; i >= 0; --i)
            body.push_back(i == 0 ? chunk[i] : static_cast<std::uint8_t>(chunk[i] | 0x80));
    };

    long cursor = 0;
    for (const WireEvent& ev : wire) {
        put_varlen(ev.tick - cursor);
        cursor = ev.tick;
        body.insert(body.end(), ev.bytes.begin(), ev.bytes.end());
    }
    put_varlen(std::max(0L, last_tick - cursor));
    body.insert(body.end(), {0xFF, 0x2F, 0x00});

    std::vector<std::uint8_t> out;
    auto put_u32be = [&out](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    };
    auto put_u16be = [&out](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    };
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    put_u32be(6);
    put_u16be(0);
    put_u16be(1);
    put_u16be(static_cast<std::uint32_t>(tpq));
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32be(static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());

    std::ofstream of(path, std::ios::binary | std::ios::trunc);
    if (!of) raise(ErrorKind::io, "cannot open for writing: " + path);
    of.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
    if (!of) raise(ErrorKind::io, "short write: " + path);
}

AudioBuffer synthesize(const ScoreTrack& track, int sample_rate,
                       const SynthConfig& config) {
    if (sample_rate <= 0)
        raise(ErrorKind::invalid_argument, "sample rate must be positive");
    if (config.harmonics < 1)
        raise(ErrorKind::invalid_argument, "harmonics must be >= 1");
    for (const NoteEvent& e : track.events) {
        if (e.duration_s <= 0.0 || e.onset_s < 0.0)
            raise(ErrorKind::invalid_argument, "invalid note event timing");
        if (e.pitch < 0 || e.pitch > 127)
            raise(ErrorKind::invalid_argument, "pitch out of range");
    }

    const double total_s = track.end_time_s() + config.pad_s;
    const std::size_t n = static_cast<std::size_t>(std::ceil(total_s * sample_rate));
    std::vector<double> mix(n, 0.0);

    const double nyquist = 0.5 * sample_rate;
    for (const NoteEvent& e : track.events) {
        const double f0 =
            440.0 * std::pow(2.0, (e.pitch - 69 + e.detune_cents / 100.0) / 12.0);
        const double vel_gain = e.velocity / 127.0;
        const std::size_t start =
            static_cast<std::size_t>(std::lround(e.onset_s * sample_rate));
        const std::size_t len =
            static_cast<std::size_t>(std::lround(e.duration_s * sample_rate));
        if (start >= n) continue;

        for (int h = 1; h <= config.harmonics; ++h) {
            const double fh = f0 * h;
            if (fh >= nyquist) break;
            const double amp = vel_gain * std::pow(h, -config.decay);
            const double omega = 2.0 * M_PI * fh / sample_rate;
            for (std::size_t k = 0; k < len && start + k < n; ++k) {
                const double t = static_cast<double>(k) / sample_rate;
                double env = 1.0;
                if (config.attack_s > 0.0) env = std::min(env, t / config.attack_s);
                if (config.release_s > 0.0)
                    env = std::min(env, (e.duration_s - t) / config.release_s);
                env = std::max(0.0, env);
                mix[start + k] += amp * env * std::sin(omega * static_cast<double>(k));
            }
        }
    }

    double peak = 0.0;
    for (double v : mix) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0 ? config.peak / peak : 0.0;

    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.samples[i] = static_cast<float>(mix[i] * gain);
    return out;
}

std::pair<ScoreTrack, GroundTruthMap> warp_tempo(const ScoreTrack& track,
                                                 const TimeMap& curve) {
    require_strictly_increasing(curve, "tempo curve");
    if (std::abs(curve.at(0.0)) > 1e-9)
        raise(ErrorKind::invalid_argument, "tempo curve must map 0 to 0");

    ScoreTrack warped = track;
    for (NoteEvent& e : warped.events) {
        const double onset = curve.at(e.onset_s);
        const double end = curve.at(e.onset_s + e.duration_s);
        e.onset_s = onset;
        e.duration_s = end - onset;
    }

    std::vector<double> sample_times{0.0};
    for (const NoteEvent& e : track.events) sample_times.push_back(e.onset_s);
    sample_times.push_back(track.end_time_s());
    std::sort(sample_times.begin(), sample_times.end());
    sample_times.erase(
        std::unique(sample_times.begin(), sample_times.end(),
                    [](double a, double b) { return std::abs(a - b) < 1e-9; }),
        sample_times.end());

    GroundTruthMap gt;
    for (double t : sample_times) gt.knots.push_back({t, curve.at(t)});
    return {std::move(warped), std::move(gt)};
}

} // namespace sialign
