//! Writes a small recording in the NTU `.skeleton` layout, parses it back and
//! derives the four input streams.
//!
//! cargo run --release --example ntu_parse

use freqmix::data::{
    derive_modality, ntu_parents, parse_ntu_name, parse_ntu_skeleton, resample_center, write_ntu_skeleton, Modality,
    SkeletonSequence, DEFAULT_CENTER_JOINT,
};
use freqmix::numerics::Tensor;

fn main() -> freqmix::Result<()> {
    let name = "S001C002P003R002A013.skeleton";
    let meta = parse_ntu_name(name).expect("valid name");
    println!("{name}: {meta:?}");

    let raw_frames = 37;
    let seq = SkeletonSequence {
        joints: Tensor::from_fn(&[25, 3, raw_frames], |ix| {
            ix[0] as f64 * 0.05 + ix[1] as f64 + (ix[2] as f64 * 0.2).sin() * 0.1
        }),
        label: meta.action as usize - 1,
        subject_id: meta.performer,
        camera_id: meta.camera,
        source: name.to_string(),
    };
    let text = write_ntu_skeleton(&seq);
    println!("{} lines of skeleton text", text.lines().count());

    let parsed = parse_ntu_skeleton(&text)?;
    println!("parsed {} joints x {} frames", parsed.num_joints(), parsed.num_frames());
    let x = resample_center(&parsed.joints, 64, DEFAULT_CENTER_JOINT)?;
    for m in Modality::ALL {
        let s = derive_modality(&x, m, &ntu_parents())?;
        println!("{m:13} shape {:?} max |v| {:.4}", s.shape(), s.max_abs());
    }
    Ok(())
}
