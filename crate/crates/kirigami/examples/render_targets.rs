//! Regenerates assets/<name>.pgm for the built-in targets at 128x128.
//!
//!     cargo run -p kirigami --example render_targets

use std::path::Path;

use kirigami::sim::RasterConfig;
use kirigami::targets::{builtin, NAMES};

fn main() -> kirigami::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    std::fs::create_dir_all(&dir)?;
    for name in NAMES {
        let mask = builtin(name, &RasterConfig::default())?;
        mask.save_pgm(&dir.join(format!("{name}.pgm")))?;
        println!("{name}: {} foreground pixels", mask.count());
    }
    Ok(())
}
