//! Text renderings of link traffic, waveforms and the codebook.

use std::fmt::Write as _;

use grs_core::codec::Codebook;
use grs_core::framing::{ascii_binary, bit_string, frame_byte, render_waveform, LinkConfig};
use grs_core::station::FrameRecord;

fn printable(b: u8) -> String {
    if b.is_ascii_graphic() {
        format!("'{}'", b as char)
    } else {
        "-".into()
    }
}

/// One line per delivered frame:
/// `<µs> <panel> <down|up> 0x<hex> <char> <wire bits> <verdict>`.
pub fn trace_line(panel: &str, rec: &FrameRecord) -> String {
    let f = &rec.frame;
    let bits = bit_string(&f.bits);
    let verdict = match f.result {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("error:{}", framing_tag(&e)),
    };
    format!(
        "{:.3} {} {} 0x{:02x} {} {} {}",
        f.at.as_micros_f64(),
        panel,
        rec.dir.as_str(),
        f.sent_byte,
        printable(f.sent_byte),
        std::str::from_utf8(&bits).unwrap_or("?"),
        verdict
    )
}

fn framing_tag(e: &grs_core::framing::FramingError) -> &'static str {
    use grs_core::framing::FramingError::*;
    match e {
        MissingStart => "missing-start",
        MissingStop => "missing-stop",
        BadLength(_) => "bad-length",
    }
}

const BIT_NAMES: [&str; 10] = ["start", "d0", "d1", "d2", "d3", "d4", "d5", "d6", "d7", "stop"];

/// Columnar step trace of one framed byte, relative to the start-bit edge.
pub fn waveform_table(byte: u8, cfg: &LinkConfig) -> String {
    let frame = frame_byte(byte, cfg);
    let wave = render_waveform(&frame);
    let mut out = String::new();
    let _ = writeln!(out, "# char {} 0x{:02x} {} baud {}", printable(byte), byte, byte, cfg.baud);
    let _ =
        writeln!(out, "# frame {} us, bit {} us", frame.duration().as_micros_f64(), cfg.bit_duration().as_micros_f64());
    out.push_str("bit\tstart_us\tend_us\tlevel\n");
    for (name, seg) in BIT_NAMES.iter().zip(&wave.segments) {
        let _ = writeln!(
            out,
            "{}\t{:.3}\t{:.3}\t{}",
            name,
            seg.start.as_micros_f64(),
            seg.end.as_micros_f64(),
            u8::from(seg.level)
        );
    }
    out
}

/// Anchored rows first, then every other assignment.
pub fn codebook_table(cb: &Codebook) -> String {
    let mut out = String::from("char\tascii\tbinary\tsignal\n");
    for row in cb.dump_rows() {
        let bin = ascii_binary(row.char);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            row.char as char,
            row.char,
            std::str::from_utf8(&bin).unwrap_or("?"),
            row.signal
        );
    }
    out
}
