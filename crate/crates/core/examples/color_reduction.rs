//! Cole-Vishkin color reduction on a rooted path of fragment ids.

use congest_mst::phase2::exchange::{cv_iterations, cv_recolor};

fn main() {
    let ids: Vec<u32> = vec![912, 17, 388, 4095, 1, 2048, 733, 600, 12, 3001];
    let mut colors = ids.clone();
    println!("start  {colors:?}");
    for round in 1..=cv_iterations(4096) {
        // vertex i's parent is i - 1; the head is the root
        colors = (0..colors.len()).map(|i| cv_recolor(colors[i], i.checked_sub(1).map(|p| colors[p]))).collect();
        println!("round {round} {colors:?}");
    }
    assert!(colors.windows(2).all(|w| w[0] != w[1]));
}
