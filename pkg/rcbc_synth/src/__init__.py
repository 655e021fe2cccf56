"""
rcbc_synth 原始碼套件：由單一軌跡資料合成多項式系統的強健障礙證書與控制器
"""

__version__ = '1.0.0'
