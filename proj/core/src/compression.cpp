#include <zlib.h>

#include <cstring>

#include "cosim/error.hpp"
#include "cosim/wire.hpp"

namespace cosim {

namespace {

constexpr int kRawDeflateWindowBits = -15;
constexpr int kCompressionLevel = 6;
constexpr size_t kChunk = 64 * 1024;

[[noreturn]] void compression_error(const std::string& detail) {
    throw WireError(WireErrorKind::kCompression, "channel_data", detail);
}

}  // namespace

Bytes compress_channel_data(ByteView raw) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (deflateInit2(&zs, kCompressionLevel, Z_DEFLATED, kRawDeflateWindowBits, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
        compression_error("deflateInit2 failed");
    }
    Bytes out(deflateBound(&zs, static_cast<uLong>(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const size_t produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) compression_error("deflate did not finish");
    out.resize(produced);
    return out;
}

Bytes decompress_channel_data(ByteView compressed, size_t max_output) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, kRawDeflateWindowBits) != Z_OK) compression_error("inflateInit2 failed");
    zs.next_in = const_cast<Bytef*>(compressed.data());
    zs.avail_in = static_cast<uInt>(compressed.size());

    Bytes out;
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        const size_t old = out.size();
        if (old >= max_output + 1) {
            inflateEnd(&zs);
            compression_error("decompressed size exceeds cap of " + std::to_string(max_output) + " bytes");
        }
        // One extra byte past the cap distinguishes "exactly at cap" from "over".
        const size_t grow = std::min(kChunk, max_output + 1 - old);
        out.resize(old + grow);
        zs.next_out = out.data() + old;
        zs.avail_out = static_cast<uInt>(grow);
        rc = inflate(&zs, Z_NO_FLUSH);
        out.resize(old + grow - zs.avail_out);
        if (rc == Z_STREAM_END) break;
        if (rc != Z_OK) {
            inflateEnd(&zs);
            compression_error(zs.msg != nullptr ? zs.msg : "corrupt deflate stream");
        }
        if (zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            compression_error("truncated deflate stream");
        }
    }
    const bool trailing = zs.avail_in != 0;
    inflateEnd(&zs);
    if (out.size() > max_output) {
        compression_error("decompressed size exceeds cap of " + std::to_string(max_output) + " bytes");
    }
    if (trailing) compression_error("trailing bytes after deflate stream");
    return out;
}

}  // namespace cosim
