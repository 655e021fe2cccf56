"""
日誌與設定檔載入工具
"""
