import numpy as np
import pytest

from src.errors import DimensionMismatch, FactorError
from src.polynomial import (Dictionary, Monomial, PolyMatrix, Polynomial, build_dictionary, dictionary_size,
                            factor_dictionary, input_matrix, poly_add, poly_eval, poly_mul,
                            poly_scale)


def test_monomial_degree_and_product():
    """測試單項式次數與乘法"""
    a = Monomial((2, 1))
    b = Monomial((0, 3))
    assert a.degree == 3
    assert (a * b).exponents == (2, 4)
    assert (a * b) / b == a
    assert Monomial.one(2).degree == 0


def test_polynomial_arithmetic():
    """測試多項式加、減、乘與求值"""
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    p = x1 * x1 - 2.0 * x2 + 3.0
    q = x1 + x2
    point = np.array([1.5, -0.5])
    assert p.degree == 2
    assert poly_eval(p, point) == pytest.approx(1.5 ** 2 + 1.0 + 3.0)
    assert poly_eval(poly_mul(p, q), point) == pytest.approx(poly_eval(p, point) * poly_eval(q, point))
    assert poly_eval(poly_add(p, q), point) == pytest.approx(poly_eval(p, point) + 1.0)
    assert poly_eval(poly_scale(p, -2.0), point) == pytest.approx(-2.0 * poly_eval(p, point))
    assert poly_scale(p, 0.0).is_zero()
    assert (p - p).is_zero()
    with pytest.raises(DimensionMismatch):
        poly_eval(p, [1.0, 2.0, 3.0])


def test_polynomial_batch_evaluation():
    """測試批次求值與單點求值一致"""
    x1 = Polynomial.variable(3, 0)
    x3 = Polynomial.variable(3, 2)
    p = x1 * x3 * x3 + 0.5 * x1
    points = np.random.default_rng(0).uniform(-2, 2, size=(20, 3))
    batch = p.evaluate(points)
    assert batch.shape == (20,)
    for point, value in zip(points, batch):
        assert value == pytest.approx(p.evaluate(point))


def test_polynomial_terms_ordering():
    """測試 terms() 依分級字典序排列"""
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    p = x2 * x2 + x1 * x2 + x1 * x1 + x2 + 1.0
    exps = [m.exponents for m, _ in p.terms()]
    assert exps == [(0, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_polynomial_json_roundtrip():
    """測試多項式 JSON 序列化"""
    p = Polynomial(2, {(1, 0): 0.25, (0, 2): -3.0, (0, 0): 1.0})
    assert Polynomial.from_json(2, p.to_json()) == p


def test_polynomial_dimension_mismatch():
    """測試變數個數不符時拋出例外"""
    with pytest.raises(DimensionMismatch):
        Polynomial.variable(2, 0) + Polynomial.variable(3, 0)
    with pytest.raises(DimensionMismatch):
        Polynomial.variable(2, 0).evaluate([1.0, 2.0, 3.0])


def test_dictionary_sizes():
    """測試字典大小：R 字典不含常數，G 字典含常數"""
    assert [m.exponents for m in build_dictionary(1, 1)] == [(1,)]
    assert len(build_dictionary(3, 2)) == 9
    assert len(build_dictionary(2, 3)) == 9
    assert len(build_dictionary(2, 3, include_constant=True)) == 10
    for n, d in [(2, 1), (2, 4), (3, 3), (4, 2)]:
        assert len(build_dictionary(n, d)) == dictionary_size(n, d, False)
    constant_only = build_dictionary(3, 0, include_constant=True)
    assert len(constant_only) == 1 and constant_only[0].degree == 0


def test_r_dictionary_rejects_constant():
    """測試 R 字典不可包含常數單項式"""
    with pytest.raises(FactorError):
        Dictionary([Monomial((0, 0)), Monomial((1, 0))], Dictionary.R)
    with pytest.raises(ValueError):
        build_dictionary(2, 0)


def test_factor_dictionary_identity():
    """測試 L(x)·x 在隨機點上重現 R(x)"""
    rng = np.random.default_rng(1)
    for n, d in [(2, 3), (3, 2), (1, 4)]:
        dictionary = build_dictionary(n, d)
        L = factor_dictionary(dictionary)
        assert L.shape == (len(dictionary), n)
        assert L.max_degree == d - 1
        for _ in range(100):
            x = rng.uniform(-3, 3, size=n)
            expected = dictionary.evaluate(x)
            got = L.evaluate(x) @ x
            np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_factor_dictionary_single_nonzero_per_row():
    """測試每一列只有一個非零元素，且位於最小的變數索引"""
    dictionary = Dictionary([Monomial((1, 0)), Monomial((1, 1)), Monomial((0, 2))], Dictionary.R)
    L = factor_dictionary(dictionary)
    assert L[1, 0] == Polynomial.variable(2, 1) and L[1, 1].is_zero()
    assert L[2, 0].is_zero() and L[2, 1] == Polynomial.variable(2, 1)


def test_dictionary_evaluate_columns():
    """測試字典對整個資料矩陣求值"""
    dictionary = build_dictionary(2, 2)
    states = np.array([[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]])
    values = dictionary.evaluate_columns(states)
    assert values.shape == (5, 3)
    for k in range(3):
        np.testing.assert_allclose(values[:, k], dictionary.evaluate(states[:, k]))


def test_polymatrix_products():
    """測試多項式矩陣與數值矩陣、多項式矩陣的乘法"""
    x = np.array([0.7, -1.2])
    L = factor_dictionary(build_dictionary(2, 2))
    A = np.arange(10, dtype=float).reshape(2, 5)
    left = (A @ L).evaluate(x)
    np.testing.assert_allclose(left, A @ L.evaluate(x))
    B = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_allclose((L @ B).evaluate(x), L.evaluate(x) @ B)
    LtL = L.T @ L
    np.testing.assert_allclose(LtL.evaluate(x), L.evaluate(x).T @ L.evaluate(x))


def test_polymatrix_coefficient_matrices_roundtrip():
    """測試係數矩陣拆解後可重建"""
    L = factor_dictionary(build_dictionary(3, 2))
    coefficients = L.coefficient_matrices()
    rebuilt = PolyMatrix.from_coefficient_matrices(coefficients, L.rows, L.cols, L.nvars)
    x = np.array([0.3, -0.4, 1.1])
    np.testing.assert_allclose(rebuilt.evaluate(x), L.evaluate(x))


def test_input_matrix_kronecker():
    """測試 G(x) = I_m ⊗ g(x)"""
    g = build_dictionary(2, 1, include_constant=True)
    G = input_matrix(g, 2)
    assert G.shape == (6, 2)
    x = np.array([2.0, -3.0])
    expected = np.kron(np.eye(2), g.evaluate(x).reshape(-1, 1))
    np.testing.assert_allclose(G.evaluate(x), expected)
