mod support;

#[test]
fn every_block_matches_central_differences() {
    let blocks = support::encoder_gradient_check();
    let mut worst = 0.0f64;
    for b in &blocks {
        assert!(b.nonzero > 0, "block {} has no gradient entry above 1e-5", b.name);
        assert!(b.worst < 1e-4, "block {}: relative error {:e}", b.name, b.worst);
        worst = worst.max(b.worst);
    }
    println!("worst relative error over {} blocks: {worst:e}", blocks.len());
}
