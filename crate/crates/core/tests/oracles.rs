mod common;

#[test]
fn walks_match_brute_force() {
    common::walks_vs_brute_force().unwrap();
}

#[test]
fn frequencies_match_recount() {
    common::frequencies_vs_recount().unwrap();
}

#[test]
fn knn_matches_full_sort() {
    common::knn_vs_full_sort().unwrap();
}

#[test]
fn ranks_match_brute_force() {
    common::ranks_vs_brute_force().unwrap();
}

#[test]
fn klasso_satisfies_normal_equations() {
    common::klasso_normal_equations().unwrap();
}

#[test]
fn hsic_matches_grid_search() {
    common::hsic_vs_grid().unwrap();
}

#[test]
fn gradients_match_finite_differences() {
    common::gradients_vs_finite_differences().unwrap();
}
