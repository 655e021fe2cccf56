"""rcbc_synth 測試套件"""
