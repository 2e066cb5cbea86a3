//! Writes a feature tensor to a `VCMT` file, reads it back and checks the
//! round trip is bit exact.

use std::fs::File;
use std::io::BufReader;

use vcm::model::{read_tensor_file, write_tensor_file};
use vcm::synthetic::smooth_tensor;

fn main() -> vcm::Result<()> {
    let tensor = smooth_tensor(16, 12, 20, 3);
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("layer3.vcmt");
    let written = write_tensor_file(&tensor, File::create(&path)?)?;
    let back = read_tensor_file(&mut BufReader::new(File::open(&path)?))?;
    let (lo, hi) = back.range();
    println!("wrote {written} bytes for a {:?} tensor, range [{lo:.3}, {hi:.3}]", tensor.dims());
    println!("bit exact: {}", back == tensor);
    Ok(())
}
