#include "facing_cli/wav.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "facing/error.hpp"

namespace facing::cli {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(const std::vector<char>& bytes, std::size_t offset) {
    T value;
    std::memcpy(&value, bytes.data() + offset, sizeof(T));
    return value;
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw InvalidInput(path.string() + ": " + what);
}

}  // namespace

void write_wav(const std::filesystem::path& path, const Signal& signal) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * sizeof(float));
    out.write("RIFF", 4);
    put<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put<std::uint32_t>(out, 16);
    put<std::uint16_t>(out, 3);  // IEEE float
    put<std::uint16_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(signal.sample_rate) * 4);
    put<std::uint16_t>(out, 4);
    put<std::uint16_t>(out, 32);
    out.write("data", 4);
    put<std::uint32_t>(out, data_bytes);
    for (double v : signal.samples) put<float>(out, static_cast<float>(v));
    if (!out) throw Error("write failed for " + path.string());
}

Signal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        fail(path, "not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::string id(bytes.data() + pos, 4);
        const auto size = get<std::uint32_t>(bytes, pos + 4);
        const std::size_t body = pos + 8;
        if (id == "fmt ") {
            if (size < 16 || body + size > bytes.size()) fail(path, "truncated fmt chunk");
            format = get<std::uint16_t>(bytes, body);
            channels = get<std::uint16_t>(bytes, body + 2);
            rate = get<std::uint32_t>(bytes, body + 4);
            bits = get<std::uint16_t>(bytes, body + 14);
            if (format == 0xFFFE && size >= 26) format = get<std::uint16_t>(bytes, body + 24);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) fail(path, "data chunk before fmt chunk");
            if (channels != 1) fail(path, "expected mono audio, found " + std::to_string(channels) + " channels");
            if (body + size > bytes.size())
                fail(path, "truncated: data chunk declares " + std::to_string(size) + " bytes, " +
                               std::to_string(bytes.size() - body) + " present");
            const std::size_t width = bits / 8;
            if (width == 0 || size % width != 0) fail(path, "data size is not a whole number of samples");
            Signal s;
            s.sample_rate = static_cast<int>(rate);
            const std::size_t n = size / width;
            s.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t at = body + i * width;
                if (format == 3 && bits == 32) s.samples[i] = get<float>(bytes, at);
                else if (format == 3 && bits == 64) s.samples[i] = get<double>(bytes, at);
                else if (format == 1 && bits == 16) s.samples[i] = get<std::int16_t>(bytes, at) / 32768.0;
                else if (format == 1 && bits == 32) s.samples[i] = get<std::int32_t>(bytes, at) / 2147483648.0;
                else if (format == 1 && bits == 24) {
                    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + at);
                    std::int32_t v = b[0] | (b[1] << 8) | (b[2] << 16);
                    if (v & 0x800000) v -= 0x1000000;
                    s.samples[i] = v / 8388608.0;
                } else {
                    fail(path, "unsupported sample format " + std::to_string(format) + "/" + std::to_string(bits) + " bit");
                }
            }
            if (s.sample_rate <= 0) fail(path, "invalid sample rate");
            return s;
        }
        pos = body + size + (size & 1u);
    }
    fail(path, have_fmt ? "truncated: no data chunk" : "missing fmt chunk");
}

}  // namespace facing::cli
