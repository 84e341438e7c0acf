fn main() {
    let t = std::time::Instant::now();
    let out = eiskernel::kernelcalc::scan_qr_conjecture(19, 5, 260, &eiskernel::CalcOptions::default()).unwrap();
    println!("q=19: {:?}\n  in {:?}", out, t.elapsed());
    let t = std::time::Instant::now();
    let out = eiskernel::kernelcalc::scan_qr_conjecture(29, 5, 260, &eiskernel::CalcOptions::default()).unwrap();
    println!("q=29: {:?}\n  in {:?}", out, t.elapsed());
}
