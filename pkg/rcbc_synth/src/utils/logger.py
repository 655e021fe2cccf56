import logging
import os
from datetime import datetime
from typing import Optional

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


# 定義顏色代碼
class Colors:
    GREEN = '\033[32m'
    RED = '\033[31m'
    RESET = '\033[0m'


class ColoredFormatter(logging.Formatter):
    def format(self, record):
        # 合成成功以綠色、證書未通過以紅色標示
        message = record.getMessage()
        if record.name == 'SynthesisPipeline' and message.startswith('合成成功'):
            record.msg = f"{Colors.GREEN}{record.msg}{Colors.RESET}"
        elif record.name == 'SynthesisPipeline' and message.startswith('閉迴路軌跡進入不安全集'):
            record.msg = f"{Colors.RED}{record.msg}{Colors.RESET}"
        return super().format(record)


def setup_logger(name: str, log_dir: Optional[str] = 'logs', level: str = 'INFO',
                 fmt: str = DEFAULT_FORMAT, color: bool = False) -> logging.Logger:
    """設定日誌記錄器

    Args:
        name: 日誌記錄器名稱（通常為 'rcbc_synth' 或類別名稱）
        log_dir: 日誌目錄；None 表示只輸出到控制台
        level: 日誌等級
        fmt: 日誌格式
        color: 控制台輸出是否上色

    Returns:
        logging.Logger: 已設定的日誌記錄器
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))

    # 重複呼叫時不重複加入處理器
    if getattr(logger, '_rcbc_configured', False):
        return logger

    formatter = logging.Formatter(fmt)

    if log_dir:
        # 建立日誌目錄
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        log_file = os.path.join(log_dir, f'{name}_{datetime.now().strftime("%Y%m%d")}.log')
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setLevel(logger.level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logger.level)
    console_handler.setFormatter(ColoredFormatter(fmt) if color else formatter)
    logger.addHandler(console_handler)

    logger._rcbc_configured = True
    return logger


def configure_logging(settings: dict) -> logging.Logger:
    """依設定檔的 logging 區段設定根記錄器

    各類別使用 logging.getLogger('類別名稱')，訊息會傳遞到根記錄器，
    因此只需在根記錄器加入處理器。
    """
    section = settings.get('logging', {}) if settings else {}
    log_dir = section.get('directory') if section.get('to_file', False) else None
    return setup_logger(
        '',
        log_dir=log_dir,
        level=section.get('level', 'INFO'),
        fmt=section.get('format', DEFAULT_FORMAT),
        color=section.get('color', False),
    )
