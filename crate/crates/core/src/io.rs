//! Atomic file output.

use std::io::Write;
use std::path::Path;

/// Writes `bytes` to `path` via a temp file in the same directory and a
/// rename, so readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Encodes an RGB image as PNG and writes it atomically.
pub fn write_png_atomic(path: &Path, image: &image::RgbImage) -> std::io::Result<()> {
    let mut buf = Vec::new();
    image
        .write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(std::io::Error::other)?;
    write_atomic(path, &buf)
}
